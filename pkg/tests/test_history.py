import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sweeping.errors import KernelEvaluationFailure, OutOfRange
from sweeping.history import (
    PerturbationSpec,
    TimeGrid,
    Trajectory,
    VolterraKernel,
    growth_check,
    interpolate,
    kernel_lipschitz_check,
    lipschitz_check,
    random_trajectory_pairs,
    verify_history_constant,
    volterra_to_history,
    zero_history,
)


def test_time_grid_construction():
    g = TimeGrid.from_step(2.0, 0.5)
    assert np.allclose(g.nodes, [0, 0.5, 1, 1.5, 2])
    with pytest.raises(ValueError):
        TimeGrid.from_step(2.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.4])
    with pytest.raises(OutOfRange):
        g.index_at_or_before(3.0)


def test_interpolate_examples():
    x = Trajectory(TimeGrid([0.0, 1.0]), [[0.0], [2.0]])
    assert interpolate(x, 0.5)[0] == pytest.approx(1.0)
    g = TimeGrid.regular(1.0, 7)
    y = Trajectory(g, np.random.default_rng(0).normal(size=(g.size, 2)))
    for k, t in enumerate(g.nodes):
        assert np.array_equal(interpolate(y, t), y.values[k])
    c = Trajectory.constant(g, [3.0, -1.0])
    assert np.allclose(interpolate(c, 0.123), [3.0, -1.0])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_interpolation_stays_between_neighbours(t):
    g = TimeGrid.regular(1.0, 11)
    vals = np.sin(5 * g.nodes)[:, None]
    v = interpolate(Trajectory(g, vals), t)[0]
    k = min(g.index_at_or_before(t), g.size - 2)
    lo, hi = sorted(vals[k:k + 2, 0])
    assert lo - 1e-15 <= v <= hi + 1e-15


def test_trajectory_csv_round_trip(tmp_path):
    g = TimeGrid.regular(1.0, 5)
    x = Trajectory(g, np.random.default_rng(1).normal(size=(g.size, 2)))
    x.to_csv(tmp_path / "x.csv")
    header = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert header == "t,x_1,x_2"
    y = Trajectory.from_csv(tmp_path / "x.csv")
    assert np.array_equal(x.values, y.values)
    assert np.array_equal(x.grid.nodes, y.grid.nodes)


def test_volterra_examples():
    g = TimeGrid.regular(1.0, 10)
    one = Trajectory.constant(g, [1.0])
    ident = volterra_to_history(VolterraKernel(lambda t, s, x: x, 1, 1.0), g)
    assert ident.evaluate_nodes(one)[-1, 0] == pytest.approx(1.0)
    lag = volterra_to_history(VolterraKernel(lambda t, s, x: (t - s)[:, None] * x, 1, lambda r, t: t), g)
    assert lag.evaluate_nodes(one)[-1, 0] == pytest.approx(0.5, abs=1e-14)
    assert np.allclose(lag.evaluate_nodes(one)[:, 0], g.nodes ** 2 / 2)
    zero = volterra_to_history(VolterraKernel(lambda t, s, x: 0 * x, 1, 0.0), g)
    assert zero.kappa == 0.0 and not np.any(zero.evaluate_nodes(one))


def test_volterra_is_causal():
    g = TimeGrid.regular(1.0, 20)
    op = volterra_to_history(VolterraKernel(lambda t, s, x: np.sin(x) * (1 + t), 1, 2.0), g)
    rng = np.random.default_rng(2)
    a = rng.normal(size=(21, 1))
    b = a.copy()
    b[12:] += 5.0
    ra, rb = op.evaluate_nodes(Trajectory(g, a)), op.evaluate_nodes(Trajectory(g, b))
    assert np.array_equal(ra[:12], rb[:12])
    assert op.evaluate(Trajectory(g, a), g.nodes[7]) == pytest.approx(ra[7])


def test_volterra_subsampling_improves_quadrature():
    # x(t) = t^2: int_0^1 s^2 ds = 1/3; trapezoid on a coarse grid overestimates
    g = TimeGrid.regular(1.0, 4)
    x = Trajectory(g, (g.nodes ** 2)[:, None])
    k = VolterraKernel(lambda t, s, x: x, 1, 1.0)
    coarse = volterra_to_history(k, g).evaluate_nodes(x)[-1, 0]
    assert coarse == pytest.approx(1 / 3, abs=0.02)
    fine = volterra_to_history(k, g, subsample=4).evaluate_nodes(x)[-1, 0]
    # linear interpolation of x between nodes: the subsampled sum equals the coarse one
    assert fine == pytest.approx(coarse)


def test_kernel_failures_are_wrapped():
    g = TimeGrid.regular(1.0, 3)
    bad = volterra_to_history(VolterraKernel(lambda t, s, x: np.full_like(x, np.nan), 1, 1.0), g)
    with pytest.raises(KernelEvaluationFailure):
        bad.evaluate_nodes(Trajectory.constant(g, [1.0]))

    def boom(t, s, x):
        raise RuntimeError("nope")

    with pytest.raises(KernelEvaluationFailure):
        volterra_to_history(VolterraKernel(boom, 1, 1.0), g).evaluate_nodes(Trajectory.constant(g, [1.0]))


def test_zero_history_examples():
    g = TimeGrid.regular(1.0, 5)
    z = zero_history(2)
    x = Trajectory(g, np.ones((g.size, 2)))
    assert not np.any(z.evaluate_nodes(x))
    assert verify_history_constant(z, random_trajectory_pairs(g, 2, 3)).passed


def test_verify_history_constant_examples():
    g = TimeGrid.regular(1.0, 100)
    x = Trajectory(g, np.sin(g.nodes)[:, None])
    ident = volterra_to_history(VolterraKernel(lambda t, s, x: x, 1, 1.0), g)
    rep = verify_history_constant(ident, [(x, x)])
    assert rep.passed and rep.max_ratio == 0.0
    pairs = random_trajectory_pairs(g, 1, 5, seed=3)
    rep = verify_history_constant(ident, pairs)
    assert rep.passed and rep.max_ratio <= 1.0 + 1e-12
    lying = volterra_to_history(VolterraKernel(lambda t, s, x: x, 1, 0.0), g)
    assert not verify_history_constant(lying, pairs).passed


def test_perturbation_checks():
    p = PerturbationSpec(lambda t, x: 2 * x + 1, alpha=2.0, beta=np.sqrt(2), lipschitz=2.0)
    rng = np.random.default_rng(0)
    pts = [(t, rng.normal(size=2)) for t in rng.uniform(0, 1, 50)]
    assert growth_check(p, pts).passed
    assert lipschitz_check(p, 1.0, [(t, x, x + 0.1) for t, x in pts]).passed
    wrong = PerturbationSpec(p.f, alpha=1.0, beta=1.0, lipschitz=1.0)
    assert not growth_check(wrong, pts).passed
    assert not lipschitz_check(wrong, 1.0, [(t, x, x + 0.1) for t, x in pts]).passed


def test_kernel_lipschitz_check_detects_misdeclaration():
    k = VolterraKernel(lambda t, s, x: 3 * x, 1, 1.0)
    rng = np.random.default_rng(0)
    samples = [(1.0, 0.5, rng.normal(size=1), rng.normal(size=1)) for _ in range(10)]
    assert not kernel_lipschitz_check(k, 1.0, samples).passed
    assert kernel_lipschitz_check(VolterraKernel(k.g, 1, 3.0), 1.0, samples).passed
