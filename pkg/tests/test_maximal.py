import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from weightlab.grid import CubeFamily, Expr, Grid, GridFunction, Measure, enumerate_family, sample
from weightlab.maximal import (
    DKernelParams,
    bmo_norm,
    d_operator,
    d_sharp_maximal,
    d_sharp_maximal_many,
    domination_constant,
    iterated_maximal,
    john_nirenberg_constant,
    level_set_measure,
    maximal,
    sharp_maximal,
)

FAMILIES = list(CubeFamily)
vals = st.floats(-50, 50, allow_nan=False)


def brute(f, family, stat, dens=None):
    """Cellwise sup of ``stat`` over the explicit family enumeration."""
    out = np.full(f.grid.shape, -np.inf)
    for q in enumerate_family(f.grid, family):
        sl = q.slices()
        v = stat(f.values[sl], None if dens is None else dens[sl])
        out[sl] = np.maximum(out[sl], v)
    return out


def avg_abs(x, d):
    if d is None:
        return np.abs(x).mean()
    return (np.abs(x) * d).sum() / d.sum()


def osc(x, d):
    return np.abs(x - x.mean()).mean()


@settings(max_examples=25, deadline=None)
@given(arrays(float, 16, elements=vals), st.sampled_from(FAMILIES))
def test_maximal_matches_brute_force_1d(x, fam):
    f = GridFunction(Grid(1, 4), x)
    np.testing.assert_allclose(maximal(f, fam).values, brute(f, fam, avg_abs), rtol=1e-12, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(arrays(float, (8, 8), elements=vals), st.sampled_from(FAMILIES))
def test_maximal_matches_brute_force_2d(x, fam):
    f = GridFunction(Grid(2, 3), x)
    np.testing.assert_allclose(maximal(f, fam).values, brute(f, fam, avg_abs), rtol=1e-12, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(arrays(float, 16, elements=vals), arrays(float, 16, elements=st.floats(0.1, 10)))
def test_weighted_maximal_brute_force(x, w):
    g = Grid(1, 4)
    f = GridFunction(g, x)
    mu = Measure.weighted(GridFunction(g, w))
    np.testing.assert_allclose(
        maximal(f, CubeFamily.ALL, mu).values, brute(f, CubeFamily.ALL, avg_abs, w), rtol=1e-12, atol=1e-12
    )


@settings(max_examples=25, deadline=None)
@given(arrays(float, 16, elements=vals), st.sampled_from(FAMILIES))
def test_sharp_matches_brute_force(x, fam):
    f = GridFunction(Grid(1, 4), x)
    np.testing.assert_allclose(sharp_maximal(f, fam).values, brute(f, fam, osc), rtol=1e-9, atol=1e-9)
    assert bmo_norm(f, fam) == pytest.approx(brute(f, fam, osc).max(), rel=1e-9, abs=1e-9)


@settings(max_examples=8, deadline=None)
@given(arrays(float, (8, 8), elements=vals), st.sampled_from(FAMILIES))
def test_sharp_2d_brute_force(x, fam):
    f = GridFunction(Grid(2, 3), x)
    np.testing.assert_allclose(sharp_maximal(f, fam).values, brute(f, fam, osc), rtol=1e-9, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(arrays(float, 32, elements=vals), st.floats(0.1, 10.0), st.floats(-5, 5))
def test_maximal_properties(x, c, shift):
    f = GridFunction(Grid(1, 5), x)
    m = maximal(f).values
    assert np.all(m >= np.abs(x) * (1 - 1e-12) - 1e-12)
    np.testing.assert_allclose(maximal(f.like(c * x)).values, c * m, rtol=1e-10, atol=1e-9)
    # M# is blind to constants, and M# <= 2 M
    s = sharp_maximal(f).values
    np.testing.assert_allclose(sharp_maximal(f.like(x + shift)).values, s, atol=1e-8)
    assert np.all(s <= 2 * m + 1e-9)
    # dyadic sup is below the full sup
    assert np.all(maximal(f, CubeFamily.DYADIC).values <= m + 1e-9)


def test_sharp_of_half_indicator_is_half():
    g = Grid(1, 6)
    f = sample(Expr("indicator", lo=0.0, hi=0.5), g)
    np.testing.assert_allclose(sharp_maximal(f).values, 0.5)
    assert bmo_norm(f) == pytest.approx(0.5)


def test_maximal_of_dirac():
    g = Grid(1, 6)
    f = sample(Expr("dirac", point=0.0), g)
    # |{Mf > lam}| for the point mass at 0: Mf(x_j) = N / (j + 1)
    np.testing.assert_allclose(maximal(f).values, g.n / (np.arange(g.n) + 1.0))


def test_iterated_maximal():
    g = Grid(1, 6)
    f = sample(Expr("indicator", lo=0.4, hi=0.5), g)
    m2 = iterated_maximal(f, 2)
    assert np.all(m2.values >= maximal(f).values - 1e-12)
    with pytest.raises(ValueError):
        iterated_maximal(f, 0)


def test_john_nirenberg_log():
    g = Grid(1, 9)
    b = sample(Expr("log", center=0.0), g)
    jn = john_nirenberg_constant(b)
    assert 0 < jn["kappa"] < 10
    assert john_nirenberg_constant(b.like(np.ones(g.shape)))["kappa"] == 0.0


def _d_brute(f, params, side):
    n = f.grid.n
    i = np.arange(n)
    k = params.radial(np.abs(i[:, None] - i[None, :]), side)
    return (k @ f.values) / k.sum(axis=1)


@pytest.mark.parametrize("side", [1, 3, 16])
def test_d_operator_brute_force(side):
    g = Grid(1, 5)
    f = GridFunction(g, np.random.default_rng(side).standard_normal(g.shape))
    params = DKernelParams(m=2.0)
    np.testing.assert_allclose(d_operator(f, params, side).values, _d_brute(f, params, side), atol=1e-12)
    np.testing.assert_allclose(d_operator(f.like(np.full(g.shape, 3.0)), params, side).values, 3.0)


def test_d_sharp_brute_force_and_batch():
    g = Grid(1, 5)
    rng = np.random.default_rng(3)
    params = DKernelParams(m=1.5)
    fs = [GridFunction(g, rng.standard_normal(g.shape)) for _ in range(3)]
    for fam in FAMILIES:
        many = d_sharp_maximal_many(fs, params, fam)
        for f, got in zip(fs, many):
            ref = np.full(g.shape, -np.inf)
            for q in enumerate_family(g, fam):
                dev = np.abs(f.values - _d_brute(f, params, q.side))
                sl = q.slices()
                ref[sl] = np.maximum(ref[sl], dev[sl].mean())
            np.testing.assert_allclose(got.values, ref, atol=1e-12)
            np.testing.assert_allclose(d_sharp_maximal(f, params, fam).values, got.values, atol=1e-14)


def test_d_sharp_constant_vanishes():
    for g in (Grid(1, 6), Grid(2, 4)):
        f = GridFunction(g, np.full(g.shape, 7.0))
        assert np.abs(d_sharp_maximal(f, DKernelParams()).values).max() < 1e-12


@pytest.mark.parametrize("dim,L", [(1, 6), (2, 4)])
def test_domination_constant(dim, L):
    g = Grid(dim, L)
    params = DKernelParams()
    C = domination_constant(params, g)
    assert np.isfinite(C) and C >= 1.0
    rng = np.random.default_rng(L)
    for _ in range(5):
        f = GridFunction(g, rng.standard_normal(g.shape) * rng.random(g.shape) ** 4)
        mf = maximal(f).values
        for side in (1, 2, g.n // 2, g.n):
            assert np.all(np.abs(d_operator(f, params, side).values) <= C * mf * (1 + 1e-10) + 1e-12)


def test_kernel_params_validate():
    with pytest.raises(ValueError):
        DKernelParams(m=0.0)


def test_level_set_measure():
    g = Grid(1, 4)
    f = GridFunction(g, np.arange(16.0))
    assert level_set_measure(f, 7.5) == pytest.approx(0.5)
    w = Measure.weighted(GridFunction(g, np.full(16, 2.0)))
    assert level_set_measure(f, 7.5, w) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, 32, elements=vals), st.floats(0.01, 10))
def test_weak_11_bound(x, t):
    f = GridFunction(Grid(1, 5), x)
    mf = maximal(f)
    lam = t * (np.abs(x).mean() + 1e-9)
    assert level_set_measure(mf, lam) <= 2 * np.abs(x).mean() / lam + 1e-12
