"""Global-best particle swarm over mixed continuous, integer and binary dimensions.

All dimensions share one velocity law. Continuous and integer coordinates
move by ``x + v`` and are clipped to their bounds (integers are rounded only
when a position is decoded). Binary coordinates are resampled each step:
the bit is 1 when ``logistic(v)`` exceeds a fresh uniform threshold.

Randomness comes from per-particle, per-iteration substreams keyed by
``(seed, particle, iteration)``, so results do not depend on the order or
concurrency in which fitness values are computed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DimKind",
    "DimensionSpec",
    "SearchSpace",
    "PsoConfig",
    "Swarm",
    "ConvergenceTrace",
    "PsoResult",
    "particle_rng",
    "initialize_swarm",
    "update_velocity",
    "update_position",
    "optimize",
]

BINARY_VMAX = 4.0


class DimKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


@dataclass(frozen=True)
class DimensionSpec:
    """One coordinate of the search space.

    ``vmax`` defaults to the upper bound for continuous and integer
    dimensions (the bound width if the upper bound is not positive) and to
    4 for binary dimensions.
    """

    kind: DimKind
    lower: float = 0.0
    upper: float = 1.0
    vmax: float | None = None
    name: str = ""

    def __post_init__(self):
        kind = DimKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is DimKind.BINARY:
            object.__setattr__(self, "lower", 0.0)
            object.__setattr__(self, "upper", 1.0)
        elif not self.lower < self.upper:
            raise ValueError(f"dimension {self.name!r}: lower must be below upper")
        if self.vmax is None:
            if kind is DimKind.BINARY:
                vmax = BINARY_VMAX
            else:
                vmax = self.upper if self.upper > 0 else self.upper - self.lower
            object.__setattr__(self, "vmax", float(vmax))
        if not self.vmax > 0:
            raise ValueError(f"dimension {self.name!r}: vmax must be positive")


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[DimensionSpec, ...]

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValueError("search space needs at least one dimension")
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims])

    @property
    def vmax(self) -> np.ndarray:
        return np.array([d.vmax for d in self.dims])

    @property
    def binary(self) -> np.ndarray:
        return np.array([d.kind is DimKind.BINARY for d in self.dims])

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def contains(self, position) -> bool:
        x = np.asarray(position, dtype=float)
        if x.shape != (len(self),):
            return False
        b = self.binary
        in_bounds = np.all((x[~b] >= self.lower[~b]) & (x[~b] <= self.upper[~b]))
        return bool(in_bounds and np.all((x[b] == 0.0) | (x[b] == 1.0)))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point: bounded coordinates uniform, bits fair coin flips."""
        u = rng.random(len(self))
        b = self.binary
        return np.where(b, (u < 0.5).astype(float), self.lower + u * (self.upper - self.lower))


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 30
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    max_iterations: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1 or self.max_iterations < 1:
            raise ValueError("n_particles and max_iterations must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class Swarm:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_fitness: np.ndarray

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]


@dataclass
class ConvergenceTrace:
    """Per-iteration global best and mean fitness of that iteration's evaluations."""

    iterations: list[int] = field(default_factory=list)
    best_fitness: list[float] = field(default_factory=list)
    mean_fitness: list[float] = field(default_factory=list)

    def append(self, iteration: int, best: float, mean: float) -> None:
        self.iterations.append(int(iteration))
        self.best_fitness.append(float(best))
        self.mean_fitness.append(float(mean))

    def __len__(self) -> int:
        return len(self.iterations)

    def is_monotone(self) -> bool:
        b = self.best_fitness
        return all(later <= earlier for earlier, later in zip(b, b[1:]))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "best_fitness", "mean_fitness"])
        for row in zip(self.iterations, self.best_fitness, self.mean_fitness):
            writer.writerow([row[0], repr(row[1]), repr(row[2])])

    @classmethod
    def from_csv(cls, path) -> "ConvergenceTrace":
        trace = cls()
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                trace.append(int(row["iteration"]), float(row["best_fitness"]), float(row["mean_fitness"]))
        return trace


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    trace: ConvergenceTrace
    n_evaluations: int


def particle_rng(seed: int, particle: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, particle, iteration])


def initialize_swarm(space: SearchSpace, config: PsoConfig) -> Swarm:
    n, d = config.n_particles, len(space)
    vmax = space.vmax
    positions = np.empty((n, d))
    velocities = np.empty((n, d))
    for i in range(n):
        rng = particle_rng(config.seed, i, 0)
        positions[i] = space.sample(rng)
        velocities[i] = rng.uniform(-vmax, vmax)
    return Swarm(positions, velocities, positions.copy(), np.full(n, np.inf))


def update_velocity(velocity, position, best_position, global_best, config: PsoConfig, r1, r2, vmax):
    """Inertia-weighted velocity step, clamped componentwise to ``[-vmax, vmax]``."""
    v = (
        config.inertia * np.asarray(velocity, dtype=float)
        + config.c1 * np.asarray(r1) * (np.asarray(best_position) - position)
        + config.c2 * np.asarray(r2) * (np.asarray(global_best) - position)
    )
    vmax = np.asarray(vmax, dtype=float)
    return np.clip(v, -vmax, vmax)


def update_position(position, velocity, space: SearchSpace, r3) -> np.ndarray:
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    moved = np.clip(position + velocity, space.lower, space.upper)
    bits = (1.0 / (1.0 + np.exp(-velocity)) > np.asarray(r3)).astype(float)
    return np.where(space.binary, bits, moved)


def _sanitize(values: Iterable[float]) -> np.ndarray:
    f = np.array([float(v) for v in values])
    f[~np.isfinite(f)] = np.inf
    return f


def _finite_mean(f: np.ndarray) -> float:
    finite = f[np.isfinite(f)]
    return float(finite.mean()) if finite.size else math.inf


def optimize(
    fitness: Callable[[np.ndarray], float],
    space: SearchSpace,
    config: PsoConfig = PsoConfig(),
    evaluate_many: Callable[[Sequence[np.ndarray]], Iterable[float]] | None = None,
) -> PsoResult:
    """Minimize ``fitness`` for ``config.max_iterations`` synchronous iterations.

    The first iteration scores the initial swarm; each later one moves every
    particle and then scores all of them, so exactly
    ``n_particles * max_iterations`` fitness calls are made. ``evaluate_many``
    may be supplied to score a whole iteration at once (e.g. through a
    process pool); non-finite values count as +inf.
    """
    if evaluate_many is None:
        def evaluate_many(positions):
            return [fitness(x) for x in positions]

    swarm = initialize_swarm(space, config)
    n, d = swarm.positions.shape
    vmax = space.vmax
    trace = ConvergenceTrace()
    g_pos = swarm.positions[0].copy()
    g_fit = math.inf
    evaluations = 0

    for t in range(config.max_iterations):
        if t > 0:
            for i in range(n):
                rng = particle_rng(config.seed, i, t)
                r1, r2, r3 = rng.random(d), rng.random(d), rng.random(d)
                swarm.velocities[i] = update_velocity(
                    swarm.velocities[i], swarm.positions[i], swarm.best_positions[i], g_pos, config, r1, r2, vmax
                )
                swarm.positions[i] = update_position(swarm.positions[i], swarm.velocities[i], space, r3)
        f = _sanitize(evaluate_many([p.copy() for p in swarm.positions]))
        if f.shape != (n,):
            raise ValueError("evaluate_many must return one value per particle")
        evaluations += n
        improved = f < swarm.best_fitness
        swarm.best_fitness[improved] = f[improved]
        swarm.best_positions[improved] = swarm.positions[improved]
        i_best = int(np.argmin(swarm.best_fitness))
        if swarm.best_fitness[i_best] < g_fit or t == 0:
            g_fit = float(swarm.best_fitness[i_best])
            g_pos = swarm.best_positions[i_best].copy()
        trace.append(t + 1, g_fit, _finite_mean(f))

    return PsoResult(g_pos, g_fit, trace, evaluations)
