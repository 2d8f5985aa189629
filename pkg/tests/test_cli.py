import json

import numpy as np
import pytest

from swarmselect import cli, pipeline
from swarmselect.cli import CliError, ExperimentConfig, load_config, main
from swarmselect.dataset import load_feature_table
from swarmselect.pipeline import CandidateSolution, CellResult, ExperimentResult, MethodId

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

FAST = ["--profile", "desk", "--set", "mlp.epochs=20"]


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    assert main(["synth", str(root / "img"), "--n-per-class", "10", "--size", "32", "--seed", "3"]) == 0
    assert main(["extract", str(root / "img"), str(root / "f.csv")]) == 0
    return root / "f.csv"


def fake_results(root, scores, runs=3, folds=2, status="complete"):
    """Write a results directory holding the given per-method score arrays."""
    (root / "results").mkdir(parents=True)
    for name, values in scores.items():
        values = np.broadcast_to(np.asarray(values, dtype=float), (runs * folds,))
        lines = []
        for i, v in enumerate(values):
            cell = CellResult(MethodId(name), i // folds, i % folds, float(v), float(v) - 0.05,
                              CandidateSolution(20, 0.3, 0.2), 1)
            lines.append(json.dumps(cell.to_record(), sort_keys=True) + "\n")
        (root / "results" / f"{name}.jsonl").write_text("".join(lines))
    settings = {"runs": runs, "folds": folds}
    (root / "meta.toml").write_text(cli.dump_toml({"run": {"status": status}, "settings": settings}))
    return root


def test_synth_and_extract_counts(tmp_path):
    assert main(["synth", str(tmp_path / "img")]) == 0
    for label in "ABC":
        assert len(list((tmp_path / "img" / label).glob("*.png"))) == 50
    assert main(["extract", str(tmp_path / "img"), str(tmp_path / "a.csv")]) == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 151
    assert all(len(line.split(",")) == 39 for line in lines)
    assert len(load_feature_table(tmp_path / "a.csv")) == 150
    assert main(["extract", str(tmp_path / "img"), str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_extract_empty_directory(tmp_path, capsys):
    (tmp_path / "img").mkdir()
    assert main(["extract", str(tmp_path / "img"), str(tmp_path / "x.csv")]) != 0
    assert "no images" in capsys.readouterr().err
    assert main(["extract", str(tmp_path / "missing"), str(tmp_path / "x.csv")]) != 0


def test_extract_unreadable_image(tmp_path, capsys):
    main(["synth", str(tmp_path / "img"), "--n-per-class", "2", "--size", "16"])
    (tmp_path / "img" / "B" / "B_0000.png").write_bytes(b"not an image")
    assert main(["extract", str(tmp_path / "img"), str(tmp_path / "x.csv")]) != 0
    assert "B_0000.png" in capsys.readouterr().err


def test_config_defaults_are_full_profile():
    cfg = ExperimentConfig()
    s = cfg.settings()
    assert (s.runs, s.folds, s.n_particles, s.max_iterations, s.epochs) == (10, 10, 30, 300, 500)
    assert cfg.methods == tuple(m.value for m in MethodId)
    assert cfg.reference == "HP_FS_PSO"


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(
        '[experiment]\nmethods = ["M1", "M3"]\nprofile = "desk"\nseed = 4\n'
        "[pso]\nn_particles = 6\n[pca]\nthreshold = 0.9\n[descriptor]\nquantization_levels = 16\n"
    )
    cfg = load_config(str(path), ["pso.max_iterations=7", "cv.runs=2"])
    s = cfg.settings()
    assert cfg.methods == ("M1", "M3")
    assert (s.runs, s.folds, s.n_particles, s.max_iterations, s.pca_threshold, s.seed) == (2, 5, 6, 7, 0.9, 4)
    assert cfg.descriptor.quantization_levels == 16


@pytest.mark.parametrize("override", ["pso.swarm=3", "nope.key=1", "experiment.color=red", "novalue"])
def test_config_rejects_unknown_keys(override):
    with pytest.raises(CliError):
        load_config(None, [override])


def test_unknown_method_is_error(tmp_path, small_csv, capsys):
    assert main(["optimize", "--data", str(small_csv), "--methods", "M9", "--out", str(tmp_path)]) != 0
    assert "M9" in capsys.readouterr().err


def test_optimize_layout(tmp_path, small_csv):
    out = tmp_path / "out"
    args = ["optimize", "--data", str(small_csv), "--methods", "M1,HP_FS_PSO", *FAST, "--set", "pso.max_iterations=10"]
    assert main([*args, "--out", str(out)]) == 0
    assert sorted(p.name for p in (out / "results").glob("*.jsonl")) == ["HP_FS_PSO.jsonl", "M1.jsonl"]
    assert len(list((out / "traces" / "HP_FS_PSO").glob("*.csv"))) == 15
    assert not (out / "traces" / "M1").exists()
    assert len(list((out / "results" / "M1").glob("*_*.jsonl"))) == 15
    assert not (out / cli.INCOMPLETE_MARKER).exists()
    meta = tomllib.loads((out / "meta.toml").read_text())
    assert meta["run"]["status"] == "complete"
    assert meta["settings"]["runs"] == 3 and meta["settings"]["epochs"] == 20
    for key in ("inner_validation", "learning_rate_floor", "pso_vmax_binary", "glcm_quantization_levels",
                "lbp_bit_rule", "pca_threshold", "wilcoxon_pairing", "final_model"):
        assert key in meta["decisions"]
    records = [json.loads(line) for line in (out / "results" / "HP_FS_PSO.jsonl").read_text().splitlines()]
    assert len(records) == 15
    assert all(r["evaluations"] == 100 and (out / r["trace_file"]).is_file() for r in records)

    again = tmp_path / "again"
    assert main([*args, "--out", str(again)]) == 0
    for name in ("M1.jsonl", "HP_FS_PSO.jsonl"):
        assert (out / "results" / name).read_bytes() == (again / "results" / name).read_bytes()


def test_interrupted_run_marked_and_resumable(tmp_path, small_csv, monkeypatch):
    out = tmp_path / "out"
    cfg = load_config(None, ["mlp.epochs=20", "pso.max_iterations=3"])
    cfg.data, cfg.profile, cfg.output_dir, cfg.methods = str(small_csv), "desk", str(out), ("M1", "M3")
    real = pipeline.run_cell
    calls = []

    def flaky(*args):
        if len(calls) == 7:
            raise KeyboardInterrupt
        calls.append(args)
        return real(*args)

    monkeypatch.setattr(cli, "run_cell", flaky)
    with pytest.raises(KeyboardInterrupt):
        cli.cmd_optimize(cfg)
    assert (out / cli.INCOMPLETE_MARKER).exists()
    assert tomllib.loads((out / "meta.toml").read_text())["run"]["status"] == "incomplete"
    assert not list((out / "results").glob("*.jsonl"))
    with pytest.raises(CliError, match="incomplete"):
        cli.load_results(out)

    counted = []
    monkeypatch.setattr(cli, "run_cell", lambda *a: counted.append(a) or real(*a))
    cli.cmd_optimize(cfg, resume=True)
    assert len(counted) == 30 - 7
    assert not (out / cli.INCOMPLETE_MARKER).exists()

    fresh = tmp_path / "fresh"
    cfg.output_dir = str(fresh)
    cli.cmd_optimize(cfg)
    for name in ("M1.jsonl", "M3.jsonl"):
        assert (out / "results" / name).read_bytes() == (fresh / "results" / name).read_bytes()


def test_report_reference_row(tmp_path, capsys):
    rng = np.random.default_rng(0)
    root = fake_results(tmp_path / "r", {"M1": rng.uniform(0.5, 0.7, 6), "HP_FS_PSO": rng.uniform(0.7, 0.9, 6)})
    assert main(["report", str(root)]) == 0
    text = (root / "report.txt").read_text()
    assert "Ref." in text.splitlines()[4]
    csv_rows = (root / "report.csv").read_text().splitlines()
    assert csv_rows[0].startswith("method,validation_mean")
    assert csv_rows[2].split(",")[3] == "Ref."
    assert (root / "curves.csv").exists()
    assert "Ref." in capsys.readouterr().out


def test_report_run_mean_pairing_with_five_runs(tmp_path):
    rng = np.random.default_rng(1)
    a, b = rng.uniform(0.5, 0.6, 10), rng.uniform(0.8, 0.9, 10)
    rows = cli.cmd_report(fake_results(tmp_path / "r", {"M1": a, "HP_FS_PSO": b}, runs=5, folds=2))
    assert rows[0].validation_p == pytest.approx(0.0625)
    assert rows[1].validation_p == "Ref."


def test_report_single_method_is_error(tmp_path, capsys):
    root = fake_results(tmp_path / "r", {"HP_FS_PSO": 0.8})
    assert main(["report", str(root)]) != 0
    assert "at least two" in capsys.readouterr().err


def test_report_identical_scores_degenerate_rows(tmp_path):
    root = fake_results(tmp_path / "r", {"M1": 0.7, "M3": 0.7, "HP_FS_PSO": 0.7})
    rows = cli.cmd_report(root)
    assert all(str(r.validation_p).startswith("n/a (degenerate") for r in rows[:2])
    text = (root / "report.txt").read_text()
    assert text.count("degenerate pairing") == 4
    assert "HP_FS_PSO" in text


def test_report_mismatched_runs(tmp_path):
    root = fake_results(tmp_path / "r", {"M1": 0.7, "HP_FS_PSO": 0.8})
    lines = (root / "results" / "M1.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    for r in records:
        r["run"] = 0
    (root / "results" / "M1.jsonl").write_text("".join(json.dumps(r) + "\n" for r in records))
    with pytest.raises(CliError, match="mismatched run counts"):
        cli.cmd_report(root)


def test_report_incomplete_results(tmp_path):
    root = fake_results(tmp_path / "r", {"M1": 0.7, "HP_FS_PSO": 0.8})
    lines = (root / "results" / "M1.jsonl").read_text().splitlines()
    (root / "results" / "M1.jsonl").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(CliError, match="expected 6"):
        cli.cmd_report(root)
    other = fake_results(tmp_path / "s", {"M1": 0.7, "HP_FS_PSO": 0.8}, status="incomplete")
    with pytest.raises(CliError):
        cli.cmd_report(other)


def test_report_missing_reference(tmp_path):
    root = fake_results(tmp_path / "r", {"M1": 0.7, "M3": 0.8})
    with pytest.raises(CliError, match="reference"):
        cli.cmd_report(root)
    assert cli.cmd_report(root, reference="M3")[1].test_p == "Ref."


def test_convergence_curves_flat_lines_for_fixed_methods():
    trace = pipeline.ConvergenceTrace()
    for t, f in enumerate([0.5, 0.4, 0.3], start=1):
        trace.append(t, f, f + 0.1)
    c = CandidateSolution(20, 0.3, 0.2)
    results = {
        MethodId.M1: ExperimentResult(MethodId.M1, [CellResult(MethodId.M1, 0, 0, 0.6, 0.6, c, 1)]),
        MethodId.M3: ExperimentResult(MethodId.M3, [CellResult(MethodId.M3, 0, 0, 0.7, 0.6, c, 3, trace=trace)]),
    }
    rows = cli.convergence_curves(results)
    m1 = [r for r in rows if r["method"] == "M1"]
    m3 = [r for r in rows if r["method"] == "M3"]
    assert [r["best_bac"] for r in m1] == [0.6] * 3
    assert [round(r["best_bac"], 12) for r in m3] == [0.5, 0.6, 0.7]


def test_module_entry_point():
    import subprocess
    import sys

    done = subprocess.run([sys.executable, "-m", "swarmselect", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip() == "0.1.0"
