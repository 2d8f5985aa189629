"""Nested cross-validation harness for joint MLP tuning and feature selection.

Every method is evaluated on the same grid of ``(run, fold)`` cells. Inside a
cell the outer-training portion is split once into inner train/validation
parts; candidates are scored by validation balanced accuracy, the winner is
retrained on the whole outer-training portion and scored once on the
held-out fold.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Sequence

import numpy as np

from . import mlp
from .dataset import N_CLASSES, Dataset, inner_split, stratified_k_fold
from .metrics import bac
from .pso import ConvergenceTrace, DimensionSpec, DimKind, PsoConfig, SearchSpace, optimize

__all__ = [
    "MethodId",
    "CandidateSolution",
    "ExperimentSettings",
    "Standardizer",
    "PcaProjection",
    "FitnessEvaluator",
    "CellResult",
    "ExperimentResult",
    "HIDDEN_RANGE",
    "LEARNING_RATE_FLOOR",
    "MOMENTUM_CAP",
    "FAILED_FITNESS",
    "build_search_space",
    "default_candidate",
    "default_hidden_units",
    "decode",
    "encode",
    "fitness",
    "pca_reduce",
    "random_search",
    "run_cell",
    "run_method",
    "derive_seed",
]

HIDDEN_RANGE = (2, 60)
LEARNING_RATE_FLOOR = 0.001
MOMENTUM_CAP = 0.999
FAILED_FITNESS = 1.0
DEFAULT_LEARNING_RATE = 0.3
DEFAULT_MOMENTUM = 0.2


class MethodId(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    M5 = "M5"
    RS = "RS"
    HP_FS_PSO = "HP_FS_PSO"

    @property
    def tunes_hyperparameters(self) -> bool:
        return self in (MethodId.M2, MethodId.M5, MethodId.RS, MethodId.HP_FS_PSO)

    @property
    def selects_features(self) -> bool:
        return self in (MethodId.M3, MethodId.RS, MethodId.HP_FS_PSO)

    @property
    def uses_pca(self) -> bool:
        return self in (MethodId.M4, MethodId.M5)

    @property
    def uses_pso(self) -> bool:
        return self in (MethodId.M2, MethodId.M3, MethodId.M5, MethodId.HP_FS_PSO)

    @property
    def searches(self) -> bool:
        return self.uses_pso or self is MethodId.RS


@dataclass(frozen=True)
class CandidateSolution:
    """Decoded particle. ``feature_mask=None`` means every input column is used."""

    hidden_units: int
    learning_rate: float
    momentum: float
    feature_mask: tuple[bool, ...] | None = None

    def __post_init__(self):
        lo, hi = HIDDEN_RANGE
        if not lo <= self.hidden_units <= hi:
            raise ValueError(f"hidden_units {self.hidden_units} outside [{lo}, {hi}]")
        if not 0.0 <= self.learning_rate <= 1.0 or not 0.0 <= self.momentum <= 1.0:
            raise ValueError("learning_rate and momentum must lie in [0, 1]")
        if self.feature_mask is not None:
            object.__setattr__(self, "feature_mask", tuple(bool(b) for b in self.feature_mask))

    @property
    def n_selected(self) -> int | None:
        return None if self.feature_mask is None else sum(self.feature_mask)

    def train_config(self, epochs: int, seed: int) -> mlp.TrainConfig:
        return mlp.TrainConfig(
            hidden_units=self.hidden_units,
            learning_rate=max(self.learning_rate, LEARNING_RATE_FLOOR),
            momentum=min(self.momentum, MOMENTUM_CAP),
            epochs=epochs,
            seed=seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "hidden_units": self.hidden_units,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "feature_mask": None if self.feature_mask is None else "".join("1" if b else "0" for b in self.feature_mask),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CandidateSolution":
        mask = d.get("feature_mask")
        return cls(
            int(d["hidden_units"]),
            float(d["learning_rate"]),
            float(d["momentum"]),
            None if mask is None else tuple(c == "1" for c in mask),
        )


@dataclass(frozen=True)
class ExperimentSettings:
    """Shape of the experiment and every tunable constant of the harness.

    Defaults reproduce the full protocol; ``desk()`` gives the reduced
    profile used for quick verification.
    """

    runs: int = 10
    folds: int = 10
    n_particles: int = 30
    max_iterations: int = 300
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    epochs: int = 500
    pca_threshold: float = 0.95
    validation_fraction: float = 0.2
    seed: int = 0

    @classmethod
    def desk(cls, **overrides) -> "ExperimentSettings":
        return cls(**{"runs": 3, "folds": 5, "n_particles": 10, "max_iterations": 50, **overrides})

    @property
    def budget(self) -> int:
        return self.n_particles * self.max_iterations

    def pso_config(self, seed: int) -> PsoConfig:
        return PsoConfig(self.n_particles, self.inertia, self.c1, self.c2, self.max_iterations, seed)

    def replace(self, **changes) -> "ExperimentSettings":
        return replace(self, **changes)


# --------------------------------------------------------------------------
# search space and candidate encoding


def default_hidden_units(n_inputs: int, n_classes: int = N_CLASSES) -> int:
    lo, hi = HIDDEN_RANGE
    return min(max((n_inputs + n_classes) // 2, lo), hi)


def default_candidate(n_inputs: int, n_classes: int = N_CLASSES) -> CandidateSolution:
    return CandidateSolution(default_hidden_units(n_inputs, n_classes), DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM)


def build_search_space(
    n_features: int = 38, tune_hyperparameters: bool = True, select_features: bool = True
) -> SearchSpace:
    dims = []
    if tune_hyperparameters:
        lo, hi = HIDDEN_RANGE
        dims += [
            DimensionSpec(DimKind.INTEGER, lo, hi, name="hidden_units"),
            DimensionSpec(DimKind.CONTINUOUS, 0.0, 1.0, name="learning_rate"),
            DimensionSpec(DimKind.CONTINUOUS, 0.0, 1.0, name="momentum"),
        ]
    if select_features:
        dims += [DimensionSpec(DimKind.BINARY, name=f"mask_{i}") for i in range(n_features)]
    return SearchSpace(tuple(dims))


def _mask_slots(space: SearchSpace) -> list[int]:
    return [i for i, d in enumerate(space.dims) if d.name.startswith("mask_")]


def decode(position, space: SearchSpace, defaults: CandidateSolution | None = None) -> CandidateSolution:
    """Turn a particle position into a candidate.

    Hyperparameters missing from ``space`` come from ``defaults``. The hidden
    layer size is rounded and clamped, and the learning rate is floored at
    ``LEARNING_RATE_FLOOR`` because a zero step never trains.
    """
    x = np.asarray(position, dtype=float)
    names = space.names
    slots = _mask_slots(space)
    if defaults is None:
        defaults = default_candidate(len(slots) if slots else 38)
    lo, hi = HIDDEN_RANGE
    hidden = defaults.hidden_units
    lr = defaults.learning_rate
    mom = defaults.momentum
    if "hidden_units" in names:
        hidden = int(min(max(math.floor(x[names.index("hidden_units")] + 0.5), lo), hi))
    if "learning_rate" in names:
        lr = min(max(float(x[names.index("learning_rate")]), LEARNING_RATE_FLOOR), 1.0)
    if "momentum" in names:
        mom = min(max(float(x[names.index("momentum")]), 0.0), 1.0)
    mask = tuple(bool(x[i] >= 0.5) for i in slots) if slots else defaults.feature_mask
    return CandidateSolution(hidden, lr, mom, mask)


def encode(candidate: CandidateSolution, space: SearchSpace) -> np.ndarray:
    x = np.zeros(len(space))
    names = space.names
    for attr in ("hidden_units", "learning_rate", "momentum"):
        if attr in names:
            x[names.index(attr)] = getattr(candidate, attr)
    slots = _mask_slots(space)
    if slots:
        if candidate.feature_mask is None or len(candidate.feature_mask) != len(slots):
            raise ValueError("candidate mask does not match the space's mask dimensions")
        x[slots] = np.array(candidate.feature_mask, dtype=float)
    return x


# --------------------------------------------------------------------------
# preprocessing


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
        return cls(X.mean(axis=0), scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True)
class PcaProjection:
    """Center (and optionally scale) with training statistics, then project on leading eigenvectors."""

    standardizer: Standardizer
    components: np.ndarray  # (m, k)
    explained_variance: np.ndarray
    explained_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return self.standardizer.transform(X) @ self.components

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_components": self.n_components,
            "explained_ratio": [float(v) for v in self.explained_ratio],
        }


def fit_pca(X: np.ndarray, variance_threshold: float, standardize: bool = False) -> PcaProjection:
    """Eigendecomposition of the sample covariance, keeping the fewest leading
    components whose cumulative variance ratio reaches ``variance_threshold``.

    With ``standardize`` the columns are scaled to unit variance first, i.e.
    the correlation matrix is decomposed.
    """
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError("variance_threshold must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two training samples")
    std = Standardizer.fit(X)
    if not standardize:
        std = Standardizer(std.mean, np.ones_like(std.scale))
    Z = std.transform(X)
    cov = Z.T @ Z / (Z.shape[0] - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1]
    eigval, eigvec = eigval[order], eigvec[:, order]
    # zero-variance directions carry nothing and are dropped outright
    keep = eigval > max(eigval[0], 0.0) * 1e-10
    eigval, eigvec = eigval[keep], eigvec[:, keep]
    if eigval.size == 0:
        raise ValueError("training data has no variance")
    ratio = eigval / eigval.sum()
    cumulative = np.cumsum(ratio)
    k = int(np.searchsorted(cumulative, variance_threshold - 1e-9) + 1)
    k = min(k, eigval.size)
    # fix the sign of each eigenvector so the projection is reproducible
    vecs = eigvec[:, :k].copy()
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(k)])
    vecs *= np.where(signs == 0, 1.0, signs)
    return PcaProjection(std, vecs, eigval[:k], ratio[:k])


def pca_reduce(
    train: Dataset, test: Dataset, variance_threshold: float = 0.95, standardize: bool = False
) -> tuple[Dataset, Dataset, PcaProjection]:
    """Fit PCA on ``train`` only and project both sets onto the retained components."""
    projection = fit_pca(train.X, variance_threshold, standardize)
    names = [f"pc_{i + 1}" for i in range(projection.n_components)]
    return (
        train.with_features(projection.transform(train.X), names),
        test.with_features(projection.transform(test.X), names),
        projection,
    )


@dataclass(frozen=True)
class _Prepared:
    X_fit: np.ndarray
    y_fit: np.ndarray
    X_eval: np.ndarray
    y_eval: np.ndarray
    n_components: int | None


def _prepare(fit_part: Dataset, eval_part: Dataset, pca_threshold: float | None) -> _Prepared:
    """Preprocessing statistics come from ``fit_part`` only."""
    X_fit, X_eval = fit_part.X, eval_part.X
    n_components = None
    if pca_threshold is not None:
        # the descriptors span several orders of magnitude, so PCA runs on standardized columns
        projection = fit_pca(X_fit, pca_threshold, standardize=True)
        X_fit, X_eval = projection.transform(X_fit), projection.transform(X_eval)
        n_components = projection.n_components
    std = Standardizer.fit(X_fit)
    return _Prepared(std.transform(X_fit), fit_part.y, std.transform(X_eval), eval_part.y, n_components)


def _train_and_score(candidate: CandidateSolution, data: _Prepared, epochs: int, seed: int) -> float:
    """Balanced accuracy on the evaluation part; raises TrainingError on divergence."""
    X_fit, X_eval = data.X_fit, data.X_eval
    if candidate.feature_mask is not None:
        mask = np.array(candidate.feature_mask, dtype=bool)
        if mask.size != X_fit.shape[1]:
            raise ValueError(f"mask has {mask.size} bits for {X_fit.shape[1]} features")
        X_fit, X_eval = X_fit[:, mask], X_eval[:, mask]
    names = [f"x{i}" for i in range(X_fit.shape[1])]
    params = mlp.train(Dataset(X_fit, data.y_fit, names), candidate.train_config(epochs, seed))
    return bac(data.y_eval, mlp.predict_batch(params, X_eval))


# --------------------------------------------------------------------------
# fitness


class FitnessEvaluator:
    """Scores candidates on one outer-training portion.

    The inner split and the network initialisation seed are fixed at
    construction, so the fitness is a deterministic function of the
    candidate and repeated candidates are served from a cache. Every call
    counts towards ``evaluations`` whether or not it was cached.
    """

    def __init__(
        self,
        outer_train: Dataset,
        seed: int,
        epochs: int = 500,
        pca_threshold: float | None = None,
        validation_fraction: float = 0.2,
    ):
        self.seed = seed
        self.epochs = epochs
        train, validation = inner_split(outer_train, seed, validation_fraction)
        self.data = _prepare(train, validation, pca_threshold)
        self.n_inputs = self.data.X_fit.shape[1]
        self.evaluations = 0
        self.failures = 0
        self._cache: dict[CandidateSolution, float] = {}

    def __call__(self, candidate: CandidateSolution) -> float:
        self.evaluations += 1
        cached = self._cache.get(candidate)
        if cached is not None:
            return cached
        if candidate.feature_mask is not None and not any(candidate.feature_mask):
            value = FAILED_FITNESS
        else:
            try:
                value = 1.0 - _train_and_score(candidate, self.data, self.epochs, self.seed)
            except mlp.TrainingError:
                self.failures += 1
                value = FAILED_FITNESS
        self._cache[candidate] = value
        return value


def fitness(candidate: CandidateSolution, outer_train: Dataset, seed: int, epochs: int = 500) -> float:
    """One minus validation balanced accuracy; 1.0 for empty masks or diverged training."""
    return FitnessEvaluator(outer_train, seed, epochs)(candidate)


# --------------------------------------------------------------------------
# search drivers


def random_search(objective, space: SearchSpace, n_samples_per_iteration: int, iterations: int, seed: int):
    """Uniform sampling with the same bookkeeping as the swarm.

    Samples are drawn in ``iterations`` batches of ``n_samples_per_iteration``;
    the trace records the best-so-far value after each batch.
    """
    best_x, best_f = None, math.inf
    trace = ConvergenceTrace()
    evaluations = 0
    for t in range(iterations):
        values = []
        for i in range(n_samples_per_iteration):
            x = space.sample(np.random.default_rng([seed, i, t]))
            f = float(objective(x))
            if not math.isfinite(f):
                f = math.inf
            evaluations += 1
            values.append(f)
            if f < best_f or best_x is None:
                best_x, best_f = x, f
        finite = [v for v in values if math.isfinite(v)]
        trace.append(t + 1, best_f, float(np.mean(finite)) if finite else math.inf)
    return best_x, best_f, trace, evaluations


@dataclass
class CellResult:
    method: MethodId
    run: int
    fold: int
    validation_bac: float
    test_bac: float
    candidate: CandidateSolution
    evaluations: int
    n_components: int | None = None
    final_training_failed: bool = False
    trace: ConvergenceTrace | None = None

    def to_record(self, trace_file: str | None = None) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "run": self.run,
            "fold": self.fold,
            "validation_bac": self.validation_bac,
            "test_bac": self.test_bac,
            "candidate": self.candidate.to_dict(),
            "pca_components": self.n_components,
            "evaluations": self.evaluations,
            "final_training_failed": self.final_training_failed,
            "trace_file": trace_file,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "CellResult":
        return cls(
            MethodId(record["method"]),
            int(record["run"]),
            int(record["fold"]),
            float(record["validation_bac"]),
            float(record["test_bac"]),
            CandidateSolution.from_dict(record["candidate"]),
            int(record["evaluations"]),
            record.get("pca_components"),
            bool(record.get("final_training_failed", False)),
        )


@dataclass
class ExperimentResult:
    method: MethodId
    cells: list[CellResult] = field(default_factory=list)

    def validation_scores(self) -> np.ndarray:
        return np.array([c.validation_bac for c in self.cells])

    def test_scores(self) -> np.ndarray:
        return np.array([c.test_bac for c in self.cells])

    def run_means(self, which: str = "test") -> np.ndarray:
        """Per-run mean over folds, ordered by run index."""
        runs = sorted({c.run for c in self.cells})
        attr = f"{which}_bac"
        return np.array([np.mean([getattr(c, attr) for c in self.cells if c.run == r]) for r in runs])


def derive_seed(master: int, *key: int) -> int:
    """Stable 32-bit seed for a tuple key under a master seed."""
    return int(np.random.SeedSequence([master, *key]).generate_state(1)[0])


_METHOD_CODE = {m: i for i, m in enumerate(MethodId)}


def _cell_seeds(settings: ExperimentSettings, method: MethodId, run: int, fold: int) -> tuple[int, int]:
    # the split seed deliberately ignores the method so all methods see the same inner split
    split_seed = derive_seed(settings.seed, 1, run, fold)
    search_seed = derive_seed(settings.seed, 2, _METHOD_CODE[method], run, fold)
    return split_seed, search_seed


def _score_holdout(candidate: CandidateSolution, outer_train: Dataset, test: Dataset, settings: ExperimentSettings, pca: bool, seed: int):
    """Retrain on the whole outer-training portion and score the held-out fold.

    This is the only place a test fold is read.
    """
    data = _prepare(outer_train, test, settings.pca_threshold if pca else None)
    try:
        return _train_and_score(candidate, data, settings.epochs, seed), False, data.n_components
    except mlp.TrainingError:
        # a diverged network is scored as if it always predicted the first class
        return bac(data.y_eval, np.zeros_like(data.y_eval)), True, data.n_components


def run_cell(
    method: MethodId, outer_train: Dataset, test: Dataset, settings: ExperimentSettings, run: int, fold: int
) -> CellResult:
    """Select a configuration on ``outer_train`` and score it once on ``test``."""
    method = MethodId(method)
    split_seed, search_seed = _cell_seeds(settings, method, run, fold)
    pca_threshold = settings.pca_threshold if method.uses_pca else None
    evaluator = FitnessEvaluator(
        outer_train, split_seed, settings.epochs, pca_threshold, settings.validation_fraction
    )
    n_inputs = outer_train.n_features
    if method.uses_pca:
        # the default width rule applies to the reduced input width
        defaults = default_candidate(fit_pca(outer_train.X, settings.pca_threshold, standardize=True).n_components)
    else:
        defaults = default_candidate(n_inputs)
    if method.selects_features:
        defaults = replace(defaults, feature_mask=(True,) * n_inputs)

    trace = None
    if not method.searches:
        candidate = defaults
        validation_fitness = evaluator(candidate)
    else:
        space = build_search_space(n_inputs, method.tunes_hyperparameters, method.selects_features)

        def objective(x):
            return evaluator(decode(x, space, defaults))

        if method is MethodId.RS:
            best_x, validation_fitness, trace, _ = random_search(
                objective, space, settings.n_particles, settings.max_iterations, search_seed
            )
        else:
            result = optimize(objective, space, settings.pso_config(search_seed))
            best_x, validation_fitness, trace = result.best_position, result.best_fitness, result.trace
        candidate = decode(best_x, space, defaults)

    test_bac, failed, n_components = _score_holdout(candidate, outer_train, test, settings, method.uses_pca, split_seed)
    return CellResult(
        method=method,
        run=run,
        fold=fold,
        validation_bac=1.0 - validation_fitness,
        test_bac=test_bac,
        candidate=candidate,
        evaluations=evaluator.evaluations,
        n_components=n_components,
        final_training_failed=failed,
        trace=trace,
    )


def fold_plans(dataset: Dataset, settings: ExperimentSettings) -> list:
    """One stratified fold plan per run, shared by every method."""
    return [stratified_k_fold(dataset, settings.folds, derive_seed(settings.seed, 0, r)) for r in range(settings.runs)]


def cell_inputs(dataset: Dataset, settings: ExperimentSettings) -> list[tuple[int, int, Dataset, Dataset]]:
    cells = []
    for run, plan in enumerate(fold_plans(dataset, settings)):
        for fold in range(settings.folds):
            train, test = plan.split(dataset, fold)
            cells.append((run, fold, train, test))
    return cells


def _run_cell_args(args):
    return run_cell(*args)


def run_method(
    method: MethodId,
    dataset: Dataset,
    settings: ExperimentSettings = ExperimentSettings(),
    executor: Executor | None = None,
    cells: Sequence[tuple[int, int]] | None = None,
) -> ExperimentResult:
    """Evaluate one method on every ``(run, fold)`` cell (or the listed subset).

    Cells are independent; with an ``executor`` they run concurrently and the
    result is identical to a sequential run.
    """
    method = MethodId(method)
    jobs = [
        (method, train, test, settings, run, fold)
        for run, fold, train, test in cell_inputs(dataset, settings)
        if cells is None or (run, fold) in cells
    ]
    if executor is None:
        results = [run_cell(*job) for job in jobs]
    else:
        results = list(executor.map(_run_cell_args, jobs))
    results.sort(key=lambda c: (c.run, c.fold))
    return ExperimentResult(method, results)
