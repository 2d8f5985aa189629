import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from swarmselect.pso import (
    ConvergenceTrace,
    DimensionSpec,
    DimKind,
    PsoConfig,
    SearchSpace,
    initialize_swarm,
    optimize,
    update_position,
    update_velocity,
)


def sphere_space(d=5):
    return SearchSpace(tuple(DimensionSpec(DimKind.CONTINUOUS, -5, 5) for _ in range(d)))


def mixed_space(n_bits=38):
    dims = [
        DimensionSpec(DimKind.INTEGER, 2, 60, name="hidden_units"),
        DimensionSpec(DimKind.CONTINUOUS, 0, 1, name="learning_rate"),
        DimensionSpec(DimKind.CONTINUOUS, 0, 1, name="momentum"),
    ]
    dims += [DimensionSpec(DimKind.BINARY, name=f"mask_{i}") for i in range(n_bits)]
    return SearchSpace(tuple(dims))


def sphere(x):
    return float(np.sum(x * x))


def test_dimension_defaults():
    assert DimensionSpec(DimKind.BINARY).vmax == 4.0
    assert DimensionSpec(DimKind.INTEGER, 2, 60).vmax == 60
    assert DimensionSpec(DimKind.CONTINUOUS, -5, -1).vmax == 4
    with pytest.raises(ValueError):
        DimensionSpec(DimKind.CONTINUOUS, 1, 1)
    with pytest.raises(ValueError):
        DimensionSpec(DimKind.CONTINUOUS, 0, 1, vmax=0)
    with pytest.raises(ValueError):
        SearchSpace(())


def test_config_defaults():
    cfg = PsoConfig()
    assert (cfg.n_particles, cfg.inertia, cfg.c1, cfg.c2, cfg.max_iterations) == (30, 0.729, 1.494, 1.494, 300)


def test_initial_swarm_shape_and_domain():
    space = mixed_space()
    swarm = initialize_swarm(space, PsoConfig(seed=4))
    assert swarm.positions.shape == (30, 41)
    assert all(space.contains(p) for p in swarm.positions)
    assert np.all(np.abs(swarm.velocities) <= space.vmax)


def test_initial_swarm_deterministic():
    a = initialize_swarm(mixed_space(), PsoConfig(seed=11))
    b = initialize_swarm(mixed_space(), PsoConfig(seed=11))
    assert_array_equal(a.positions, b.positions)
    assert_array_equal(a.velocities, b.velocities)


def test_all_binary_space_positions():
    space = SearchSpace(tuple(DimensionSpec(DimKind.BINARY) for _ in range(12)))
    swarm = initialize_swarm(space, PsoConfig(n_particles=20))
    assert set(np.unique(swarm.positions)) <= {0.0, 1.0}


def test_velocity_hand_example():
    v = update_velocity(1.0, 0.0, 2.0, 4.0, PsoConfig(), 0.5, 0.5, 10.0)
    assert v == pytest.approx(0.729 + 1.494 + 2.988)
    assert v == pytest.approx(5.211)


def test_velocity_fixed_point():
    assert update_velocity(0.0, 1.5, 1.5, 1.5, PsoConfig(), 0.3, 0.9, 5.0) == 0.0


@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
    st.floats(0.1, 10),
)
def test_velocity_clamped(v, delta, r, vmax):
    x = np.zeros(3)
    out = update_velocity(v, x, np.asarray(delta), -np.asarray(delta), PsoConfig(), r, r[::-1], vmax)
    assert np.all(np.abs(out) <= vmax)


def test_velocity_geometric_decay():
    cfg = PsoConfig(inertia=0.729, c1=0.0, c2=0.0)
    v0 = np.array([0.3, -0.2, 0.1])
    v = v0.copy()
    for t in range(1, 20):
        v = update_velocity(v, np.zeros(3), np.ones(3), np.ones(3), cfg, 0.5, 0.5, 10.0)
        assert_allclose(np.linalg.norm(v), 0.729**t * np.linalg.norm(v0), rtol=1e-12)


def test_position_clipped():
    space = SearchSpace((DimensionSpec(DimKind.CONTINUOUS, 0, 1),))
    assert update_position([0.9], [0.3], space, [0.5])[0] == 1.0


def test_binary_midpoint_probability():
    space = SearchSpace((DimensionSpec(DimKind.BINARY),))
    rng = np.random.default_rng(0)
    ones = np.mean([update_position([0.0], [0.0], space, [rng.random()])[0] for _ in range(10_000)])
    assert abs(ones - 0.5) < 0.02


def test_binary_saturated_probability():
    space = SearchSpace((DimensionSpec(DimKind.BINARY),))
    rng = np.random.default_rng(1)
    ones = np.mean([update_position([0.0], [4.0], space, [rng.random()])[0] for _ in range(10_000)])
    assert abs(ones - 1 / (1 + math.exp(-4))) < 0.01
    assert 1 / (1 + math.exp(-4)) == pytest.approx(0.982, abs=5e-4)


def test_sphere_converges():
    res = optimize(sphere, sphere_space(), PsoConfig(seed=0))
    assert res.best_fitness < 1e-3
    assert res.n_evaluations == 30 * 300
    assert len(res.trace) == 300
    assert res.trace.is_monotone()
    assert sphere(res.best_position) == res.best_fitness


def test_constant_fitness():
    space = sphere_space(3)
    cfg = PsoConfig(n_particles=5, max_iterations=10, seed=2)
    res = optimize(lambda x: 1.0, space, cfg)
    assert_array_equal(res.best_position, initialize_swarm(space, cfg).positions[0])
    assert set(res.trace.best_fitness) == {1.0}


def test_same_seed_same_trace():
    cfg = PsoConfig(n_particles=8, max_iterations=25, seed=3)
    a, b = optimize(sphere, sphere_space(), cfg), optimize(sphere, sphere_space(), cfg)
    assert a.trace == b.trace
    assert_array_equal(a.best_position, b.best_position)


def test_batch_evaluation_matches_serial():
    cfg = PsoConfig(n_particles=6, max_iterations=15, seed=9)
    calls = []

    def many(positions):
        calls.append(len(positions))
        return [sphere(p) for p in reversed(positions)][::-1]

    assert optimize(sphere, sphere_space(), cfg, many).trace == optimize(sphere, sphere_space(), cfg).trace
    assert calls == [6] * 15


def test_non_finite_fitness_is_worst():
    cfg = PsoConfig(n_particles=6, max_iterations=10, seed=1)
    res = optimize(lambda x: math.nan if x[0] > 0 else sphere(x), sphere_space(2), cfg)
    assert math.isfinite(res.best_fitness)
    assert res.best_position[0] <= 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(1, 12))
def test_invariants_on_mixed_space(seed, n_particles, iterations):
    space = mixed_space(6)
    seen = []

    def many(positions):
        values = []
        for p in positions:
            assert space.contains(p)
            values.append(float(np.sum((p - 0.3) ** 2)))
        seen.append(values)
        return values

    res = optimize(None, space, PsoConfig(n_particles=n_particles, max_iterations=iterations, seed=seed), many)
    assert res.trace.is_monotone()
    assert res.best_fitness == min(min(v) for v in seen)
    running = np.minimum.accumulate(np.array(seen), axis=0)
    assert np.all(np.diff(running, axis=0) <= 0)
    assert_allclose(res.trace.mean_fitness, [np.mean(v) for v in seen])


def test_trace_csv_round_trip(tmp_path):
    trace = ConvergenceTrace()
    for t, (b, m) in enumerate([(0.5, 0.7), (0.25, 0.6), (0.25, 1 / 3)], start=1):
        trace.append(t, b, m)
    trace.to_csv(tmp_path / "t.csv")
    assert ConvergenceTrace.from_csv(tmp_path / "t.csv") == trace
    buf = io.StringIO()
    trace.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "iteration,best_fitness,mean_fitness"
