"""Command-line entry point: synth, extract, optimize, baselines, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dataset import ClassLabel, Dataset, DatasetError, generate_synthetic_textures, load_feature_table
from .features import DescriptorConfig, extract_dataset
from .pipeline import (
    FAILED_FITNESS,
    LEARNING_RATE_FLOOR,
    MOMENTUM_CAP,
    CellResult,
    ExperimentResult,
    ExperimentSettings,
    MethodId,
    cell_inputs,
    run_cell,
)
from .pso import BINARY_VMAX, ConvergenceTrace
from .stats import DegeneratePairingError, wilcoxon_signed_rank

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("swarmselect")

ALL_METHODS = tuple(m.value for m in MethodId)
BASELINE_METHODS = ("M1", "M2", "M3", "M4", "M5", "RS")
IMAGE_SUFFIXES = {".png", ".pgm", ".pnm", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg"}
INCOMPLETE_MARKER = "INCOMPLETE"
MIN_RUNS_FOR_RUN_PAIRING = 5


class CliError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass
class SyntheticSpec:
    n_per_class: int = 50
    image_size: int = 64
    seed: int = 7


PROFILES = {
    "full": {},
    "desk": {"runs": 3, "folds": 5, "n_particles": 10, "max_iterations": 50},
}

_SETTING_SECTIONS = {
    "cv": ("runs", "folds", "validation_fraction"),
    "pso": ("n_particles", "max_iterations", "inertia", "c1", "c2"),
    "mlp": ("epochs",),
    "pca": ("pca_threshold",),
}


@dataclass
class ExperimentConfig:
    data: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    methods: tuple[str, ...] = ALL_METHODS
    profile: str = "full"
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    reference: str = MethodId.HP_FS_PSO.value
    overrides: dict[str, Any] = field(default_factory=dict)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)

    def settings(self) -> ExperimentSettings:
        if self.profile not in PROFILES:
            raise CliError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")
        values = {**PROFILES[self.profile], **self.overrides, "seed": self.seed}
        known = {f.name for f in fields(ExperimentSettings)}
        unknown = set(values) - known
        if unknown:
            raise CliError(f"unknown setting(s): {', '.join(sorted(unknown))}")
        return ExperimentSettings(**values)

    def method_ids(self) -> list[MethodId]:
        try:
            return [MethodId(m) for m in self.methods]
        except ValueError as exc:
            raise CliError(f"{exc}; choose from {', '.join(ALL_METHODS)}") from None


def _coerce(text: str):
    for parse in (int, float):
        try:
            return parse(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def apply_setting(config: ExperimentConfig, key: str, value) -> None:
    """Apply a dotted ``section.key`` setting from a file or ``--set``."""
    section, _, name = key.rpartition(".")
    if section in ("", "experiment"):
        if name == "methods":
            value = [v.strip() for v in value.split(",")] if isinstance(value, str) else list(value)
            config.methods = tuple(value)
        elif name in ("data", "output_dir", "profile", "reference"):
            setattr(config, name, None if value in ("", None) else str(value))
        elif name in ("seed", "workers"):
            setattr(config, name, int(value))
        else:
            raise CliError(f"unknown experiment key {name!r}")
    elif section in _SETTING_SECTIONS:
        if name == "threshold" and section == "pca":
            name = "pca_threshold"
        if name not in _SETTING_SECTIONS[section]:
            raise CliError(f"unknown key {name!r} in section [{section}]")
        config.overrides[name] = value
    elif section == "synthetic":
        if name not in {f.name for f in fields(SyntheticSpec)}:
            raise CliError(f"unknown key {name!r} in section [synthetic]")
        setattr(config.synthetic, name, int(value))
    elif section == "descriptor":
        current = asdict(config.descriptor)
        if name not in current:
            raise CliError(f"unknown key {name!r} in section [descriptor]")
        if name == "glcm_angles":
            value = tuple(int(v) for v in (value.split(",") if isinstance(value, str) else value))
        current[name] = value
        config.descriptor = DescriptorConfig(**current)
    else:
        raise CliError(f"unknown configuration section {section!r}")


def load_config(path: str | None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    config = ExperimentConfig()
    if path:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise CliError(f"invalid config {path}: {exc}") from None
        for section, table in doc.items():
            if not isinstance(table, dict):
                apply_setting(config, section, table)
                continue
            for key, value in table.items():
                apply_setting(config, f"{section}.{key}", value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects key=value, got {item!r}")
        apply_setting(config, key.strip(), _coerce(value.strip()))
    return config


# --------------------------------------------------------------------------
# small file helpers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return json.dumps(str(value))


def dump_toml(doc: dict[str, dict[str, Any]]) -> str:
    out = []
    for section, table in doc.items():
        out.append(f"[{section}]")
        out += [f"{key} = {_toml_value(value)}" for key, value in table.items() if value is not None]
        out.append("")
    return "\n".join(out)


def _json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# synth / extract


def cmd_synth(out_dir, n_per_class: int = 50, image_size: int = 64, seed: int = 7) -> int:
    from PIL import Image

    images, labels = generate_synthetic_textures(n_per_class, image_size, seed)
    out_dir = Path(out_dir)
    counters = {label: 0 for label in ClassLabel}
    for image, label in zip(images, labels):
        target = out_dir / label.name / f"{label.name}_{counters[label]:04d}.png"
        target.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image, mode="L").save(target)
        counters[label] += 1
    return len(images)


def read_image_dir(image_dir) -> tuple[list[np.ndarray], list[ClassLabel], list[Path]]:
    from PIL import Image, UnidentifiedImageError

    root = Path(image_dir)
    if not root.is_dir():
        raise CliError(f"image directory not found: {root}")
    images, labels, paths = [], [], []
    for label in ClassLabel:
        class_dir = root / label.name
        files = sorted(p for p in class_dir.glob("*") if p.suffix.lower() in IMAGE_SUFFIXES) if class_dir.is_dir() else []
        if not files:
            raise CliError(f"no images for class {label.name} under {class_dir}")
        for p in files:
            try:
                with Image.open(p) as im:
                    images.append(np.asarray(im.convert("L"), dtype=np.uint8))
            except (OSError, UnidentifiedImageError) as exc:
                raise CliError(f"cannot read image {p}: {exc}") from None
            labels.append(label)
            paths.append(p)
    return images, labels, paths


def cmd_extract(image_dir, out_csv, config: DescriptorConfig = DescriptorConfig()) -> Dataset:
    from .dataset import save_feature_table

    images, labels, _ = read_image_dir(image_dir)
    try:
        dataset = extract_dataset(images, labels, config)
    except ValueError as exc:
        raise CliError(f"feature extraction failed: {exc}") from None
    save_feature_table(dataset, out_csv)
    return dataset


# --------------------------------------------------------------------------
# optimize


def _load_dataset(config: ExperimentConfig) -> Dataset:
    if config.data:
        return load_feature_table(config.data)
    spec = config.synthetic
    images, labels = generate_synthetic_textures(spec.n_per_class, spec.image_size, spec.seed)
    return extract_dataset(images, labels, config.descriptor)


def _decisions(config: ExperimentConfig, settings: ExperimentSettings) -> dict[str, Any]:
    d = config.descriptor
    return {
        "inner_validation": "single stratified holdout per outer fold",
        "validation_fraction": settings.validation_fraction,
        "fold_assignment": "per-class seeded shuffle, dealt round-robin",
        "mlp_hidden_activation": "logistic",
        "mlp_output": "softmax with mean cross-entropy",
        "mlp_batching": "full batch",
        "mlp_init": "uniform in +-1/sqrt(fan_in), zero biases",
        "mlp_epochs": settings.epochs,
        "default_learning_rate": 0.3,
        "default_momentum": 0.2,
        "default_hidden_units": "(n_inputs + n_classes) // 2, clamped to [2, 60]",
        "default_hidden_units_pca": "rule applied to the PCA width fitted on the outer-training portion",
        "feature_standardization": "z-score with training-portion statistics",
        "learning_rate_floor": LEARNING_RATE_FLOOR,
        "momentum_cap": MOMENTUM_CAP,
        "empty_mask_fitness": FAILED_FITNESS,
        "failed_training_fitness": FAILED_FITNESS,
        "pso_topology": "global best",
        "pso_update": "synchronous",
        "pso_random_draws": "r1, r2, r3 per dimension from (seed, particle, iteration) substreams",
        "pso_vmax_bounded": "upper bound of the dimension",
        "pso_vmax_binary": BINARY_VMAX,
        "pso_out_of_bounds": "clip position, keep velocity",
        "integer_rounding": "at decode time",
        "pca_threshold": settings.pca_threshold,
        "pca_scaling": "z-score before eigendecomposition, components re-standardized",
        "final_model": "winner retrained on the full outer-training portion",
        "glcm_quantization_levels": d.quantization_levels,
        "glcm_distance": d.glcm_distance,
        "glcm_angles": list(d.glcm_angles),
        "glcm_symmetric": True,
        "glcm_flat_correlation": 1.0,
        "lbp_neighbors": d.lbp_neighbors,
        "lbp_radius": d.lbp_radius,
        "lbp_bit_rule": "neighbor >= center",
        "lbp_mapping": "uniform patterns by 1-bit count, one shared non-uniform bin",
        "wilcoxon_pairing": f"run means; per-cell scores when fewer than {MIN_RUNS_FOR_RUN_PAIRING} runs",
        "wilcoxon_zero_differences": "dropped",
        "wilcoxon_sides": "two-sided",
    }


def _meta(config: ExperimentConfig, settings: ExperimentSettings, dataset: Dataset, status: str) -> str:
    counts = dataset.class_counts()
    data = {"source": config.data or "synthetic", "n_samples": len(dataset), "n_features": dataset.n_features}
    data.update({f"class_{c.name}": int(counts[c]) for c in ClassLabel})
    if not config.data:
        data.update({f"synthetic_{k}": v for k, v in asdict(config.synthetic).items()})
    doc = {
        "run": {"status": status, "version": __version__, "profile": config.profile,
                "methods": list(config.methods), "workers": config.workers},
        "settings": asdict(settings),
        "data": data,
        "decisions": _decisions(config, settings),
    }
    return dump_toml(doc)


def _cell_paths(out: Path, method: MethodId, run: int, fold: int) -> tuple[Path, Path]:
    stem = f"{run}_{fold}"
    return out / "results" / method.value / f"{stem}.jsonl", out / "traces" / method.value / f"{stem}.csv"


def _write_cell(out: Path, cell: CellResult) -> None:
    result_path, trace_path = _cell_paths(out, cell.method, cell.run, cell.fold)
    trace_ref = None
    if cell.trace is not None:
        buf = io.StringIO()
        cell.trace.write_csv(buf)
        _atomic_write(trace_path, buf.getvalue())
        trace_ref = trace_path.relative_to(out).as_posix()
    _atomic_write(result_path, _json_line(cell.to_record(trace_ref)))


def _read_cell(out: Path, method: MethodId, run: int, fold: int) -> CellResult | None:
    result_path, _ = _cell_paths(out, method, run, fold)
    if not result_path.is_file():
        return None
    record = json.loads(result_path.read_text())
    cell = CellResult.from_record(record)
    if record.get("trace_file"):
        cell.trace = ConvergenceTrace.from_csv(out / record["trace_file"])
    return cell


def _job(args):
    method, train, test, settings, run, fold = args
    return run_cell(method, train, test, settings, run, fold)


def cmd_optimize(config: ExperimentConfig, resume: bool = False) -> dict[MethodId, ExperimentResult]:
    """Run every requested method over all cells and write results, traces and metadata.

    An ``INCOMPLETE`` marker and ``status = "incomplete"`` in ``meta.toml``
    flag the directory until every cell has been written; per-method merged
    files appear only once that method is complete.
    """
    settings = config.settings()
    methods = config.method_ids()
    dataset = _load_dataset(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / INCOMPLETE_MARKER, "run in progress or interrupted\n")
    _atomic_write(out / "meta.toml", _meta(config, settings, dataset, "incomplete"))
    for method in methods:
        merged = out / "results" / f"{method.value}.jsonl"
        if merged.exists():
            merged.unlink()

    cells = cell_inputs(dataset, settings)
    done: dict[tuple[MethodId, int, int], CellResult] = {}
    jobs = []
    for method in methods:
        for run, fold, train, test in cells:
            cached = _read_cell(out, method, run, fold) if resume else None
            if cached is not None:
                done[(method, run, fold)] = cached
            else:
                jobs.append((method, train, test, settings, run, fold))

    log.info("%d cells to compute, %d reused", len(jobs), len(done))
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for cell in pool.map(_job, jobs):
                _write_cell(out, cell)
                done[(cell.method, cell.run, cell.fold)] = cell
    else:
        for job in jobs:
            cell = _job(job)
            _write_cell(out, cell)
            done[(cell.method, cell.run, cell.fold)] = cell
            log.info("%s run %d fold %d: validation %.4f test %.4f",
                     cell.method.value, cell.run, cell.fold, cell.validation_bac, cell.test_bac)

    results = {}
    for method in methods:
        method_cells = sorted((c for (m, _, _), c in done.items() if m is method), key=lambda c: (c.run, c.fold))
        results[method] = ExperimentResult(method, method_cells)
        lines = []
        for cell in method_cells:
            trace_ref = _cell_paths(out, method, cell.run, cell.fold)[1].relative_to(out).as_posix() if cell.trace else None
            lines.append(_json_line(cell.to_record(trace_ref)))
        _atomic_write(out / "results" / f"{method.value}.jsonl", "".join(lines))

    _atomic_write(out / "meta.toml", _meta(config, settings, dataset, "complete"))
    (out / INCOMPLETE_MARKER).unlink()
    return results


# --------------------------------------------------------------------------
# report


@dataclass
class ReportRow:
    method: str
    validation_mean: float
    validation_sd: float
    test_mean: float
    test_sd: float
    validation_p: float | str | None
    test_p: float | str | None


def load_results(results_dir) -> tuple[dict[MethodId, ExperimentResult], dict[str, Any]]:
    root = Path(results_dir)
    if (root / INCOMPLETE_MARKER).exists():
        raise CliError(f"{root} holds an incomplete run")
    meta_path = root / "meta.toml"
    if not meta_path.is_file():
        raise CliError(f"{root} has no meta.toml")
    meta = tomllib.loads(meta_path.read_text())
    if meta.get("run", {}).get("status") != "complete":
        raise CliError(f"{root} is marked incomplete")
    expected = meta["settings"]["runs"] * meta["settings"]["folds"]
    results = {}
    for path in sorted((root / "results").glob("*.jsonl")):
        try:
            method = MethodId(path.stem)
        except ValueError:
            continue
        cells = [CellResult.from_record(json.loads(line)) for line in path.read_text().splitlines() if line.strip()]
        if len(cells) != expected:
            raise CliError(f"{path.name}: {len(cells)} records, expected {expected}")
        for cell in cells:
            record_trace = _cell_paths(root, method, cell.run, cell.fold)[1]
            if record_trace.is_file():
                cell.trace = ConvergenceTrace.from_csv(record_trace)
        results[method] = ExperimentResult(method, cells)
    return results, meta


def _paired(result: ExperimentResult, which: str, by_run: bool) -> np.ndarray:
    if by_run:
        return result.run_means(which)
    ordered = sorted(result.cells, key=lambda c: (c.run, c.fold))
    return np.array([getattr(c, f"{which}_bac") for c in ordered])


def build_report(results: dict[MethodId, ExperimentResult], reference: MethodId) -> list[ReportRow]:
    if len(results) < 2:
        raise CliError("a report needs at least two methods with complete results")
    if reference not in results:
        raise CliError(f"reference method {reference.value} has no results")
    run_counts = {m: len({c.run for c in r.cells}) for m, r in results.items()}
    if len(set(run_counts.values())) != 1:
        detail = ", ".join(f"{m.value}={n}" for m, n in run_counts.items())
        raise CliError(f"mismatched run counts across methods: {detail}")
    by_run = next(iter(run_counts.values())) >= MIN_RUNS_FOR_RUN_PAIRING

    rows = []
    for method in MethodId:
        if method not in results:
            continue
        r = results[method]
        row = ReportRow(method.value, *_mean_sd(r.run_means("validation")), *_mean_sd(r.run_means("test")), None, None)
        for which in ("validation", "test"):
            if method is reference:
                p: float | str = "Ref."
            else:
                try:
                    p = wilcoxon_signed_rank(_paired(r, which, by_run), _paired(results[reference], which, by_run)).p_value
                except DegeneratePairingError as exc:
                    p = f"n/a ({exc})"
            setattr(row, f"{which}_p", p)
        rows.append(row)
    return rows


def _mean_sd(values: np.ndarray) -> tuple[float, float]:
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), sd


def _fmt_p(p) -> str:
    if isinstance(p, float):
        return f"{p:.3f}"
    return "n/a" if str(p).startswith("n/a") else str(p)


def render_table(rows: list[ReportRow]) -> str:
    header = ("Method", "Validation (BAC +- SD)", "p-value", "Test (BAC +- SD)", "p-value")
    body = [
        (r.method, f"{r.validation_mean:.3f} +- {r.validation_sd:.3f}", _fmt_p(r.validation_p),
         f"{r.test_mean:.3f} +- {r.test_sd:.3f}", _fmt_p(r.test_p))
        for r in rows
    ]
    widths = [max(len(str(row[i])) for row in [header, *body]) for i in range(len(header))]
    line = lambda row: "  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip()
    rule = "-" * len(line(header))
    notes = [
        f"{r.method} {which}: {getattr(r, f'{which}_p')[5:-1]}"
        for r in rows
        for which in ("validation", "test")
        if str(getattr(r, f"{which}_p")).startswith("n/a")
    ]
    return "\n".join([rule, line(header), rule, *map(line, body), rule, *notes]) + "\n"


def convergence_curves(results: dict[MethodId, ExperimentResult]) -> list[dict[str, Any]]:
    """Mean best-so-far and per-iteration mean validation BAC across cells.

    Methods without a search are emitted as flat lines at their mean
    validation BAC so they can be drawn next to the searches.
    """
    rows = []
    lengths = [len(c.trace) for r in results.values() for c in r.cells if c.trace is not None]
    n_iter = max(lengths, default=0)
    for method in MethodId:
        if method not in results:
            continue
        traces = [c.trace for c in results[method].cells if c.trace is not None]
        if traces:
            best = 1.0 - np.mean([t.best_fitness for t in traces], axis=0)
            mean = 1.0 - np.mean([t.mean_fitness for t in traces], axis=0)
            for i, (b, m) in enumerate(zip(best, mean), start=1):
                rows.append({"method": method.value, "iteration": i, "best_bac": float(b), "mean_bac": float(m)})
        else:
            level = float(results[method].validation_scores().mean())
            for i in range(1, n_iter + 1):
                rows.append({"method": method.value, "iteration": i, "best_bac": level, "mean_bac": level})
    return rows


def cmd_report(results_dir, reference: str = MethodId.HP_FS_PSO.value, out_dir=None) -> list[ReportRow]:
    results, _ = load_results(results_dir)
    rows = build_report(results, MethodId(reference))
    out = Path(out_dir or results_dir)
    text = render_table(rows)
    _atomic_write(out / "report.txt", text)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "validation_mean", "validation_sd", "validation_p", "test_mean", "test_sd", "test_p"])
    for r in rows:
        writer.writerow([r.method, repr(r.validation_mean), repr(r.validation_sd), _fmt_p(r.validation_p),
                         repr(r.test_mean), repr(r.test_sd), _fmt_p(r.test_p)])
    _atomic_write(out / "report.csv", buf.getvalue())

    buf = io.StringIO()
    writer = csv.DictWriter(buf, ["method", "iteration", "best_bac", "mean_bac"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(convergence_curves(results))
    _atomic_write(out / "curves.csv", buf.getvalue())
    sys.stdout.write(text)
    return rows


# --------------------------------------------------------------------------
# argument parsing


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--data", help="feature CSV (default: synthetic textures)")
    p.add_argument("--methods", help="comma-separated method ids")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--resume", action="store_true", help="reuse finished cells in the output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration value, e.g. pso.n_particles=10")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmselect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic A/B/C texture images")
    p.add_argument("out_dir")
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("extract", help="extract the 38 texture features from A/ B/ C/ image folders")
    p.add_argument("image_dir")
    p.add_argument("out_csv")
    p.add_argument("--levels", type=int, default=8, help="GLCM gray levels")
    p.add_argument("--distance", type=int, default=1, help="GLCM pixel offset")
    p.add_argument("--lbp-neighbors", type=int, default=24)
    p.add_argument("--lbp-radius", type=float, default=3)

    p = sub.add_parser("optimize", help="run the nested cross-validation experiment")
    _add_run_options(p)
    p = sub.add_parser("baselines", help="optimize with M1-M5 and RS")
    _add_run_options(p)

    p = sub.add_parser("report", help="tabulate results with Wilcoxon p-values")
    p.add_argument("results_dir")
    p.add_argument("--reference", default=MethodId.HP_FS_PSO.value, choices=ALL_METHODS)
    p.add_argument("--out", dest="out_dir")
    return parser


def _config_from_args(args, default_methods=None) -> ExperimentConfig:
    config = load_config(args.config, args.overrides)
    if default_methods is not None and args.methods is None:
        config.methods = default_methods
    if args.methods:
        config.methods = tuple(m.strip() for m in args.methods.split(","))
    for name in ("data", "profile", "seed", "output_dir", "workers"):
        value = getattr(args, name)
        if value is not None:
            setattr(config, name, value)
    return config


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "synth":
            n = cmd_synth(args.out_dir, args.n_per_class, args.size, args.seed)
            print(f"wrote {n} images to {args.out_dir}")
        elif args.command == "extract":
            config = DescriptorConfig(glcm_distance=args.distance, quantization_levels=args.levels,
                                      lbp_neighbors=args.lbp_neighbors, lbp_radius=args.lbp_radius)
            dataset = cmd_extract(args.image_dir, args.out_csv, config)
            print(f"wrote {len(dataset)} rows x {dataset.n_features} features to {args.out_csv}")
        elif args.command in ("optimize", "baselines"):
            config = _config_from_args(args, BASELINE_METHODS if args.command == "baselines" else None)
            cmd_optimize(config, resume=args.resume)
            print(f"results written to {config.output_dir}")
        elif args.command == "report":
            cmd_report(args.results_dir, args.reference, args.out_dir)
    except (CliError, DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
