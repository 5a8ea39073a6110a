import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from weightlab.czd import (
    cz_decompose,
    gradient,
    gradient_cz_decompose,
    gradient_norm,
    partition_of_unity,
    poincare_check,
    whitney,
)
from weightlab.grid import CubeFamily, Expr, Grid, GridFunction, Measure, sample


def test_cz_spec_example():
    g = Grid(1, 6)
    f = sample(Expr("indicator", lo=0.0, hi=0.25, value=4.0), g)
    res = cz_decompose(f, 1.0, 1.5)
    assert res.all_passed
    assert [(c.anchor, c.side) for c in res.cubes] == [((0,), 32)]
    np.testing.assert_allclose(res.g.values[:32], 2.0)
    np.testing.assert_allclose(res.g.values[32:], 0.0)


def test_cz_height_above_max_gives_no_cubes():
    g = Grid(2, 4)
    f = sample(Expr("bump", center=[0.5, 0.5], width=0.3), g)
    res = cz_decompose(f, 1.0, 10.0)
    assert res.cubes == [] and res.all_passed
    np.testing.assert_array_equal(res.g.values, f.values)


def test_cz_root_stops_when_average_exceeds_height():
    g = Grid(1, 4)
    f = GridFunction(g, np.full(16, 5.0))
    res = cz_decompose(f, 1.0, 1.0)
    assert res.extras["root_stopped"] and len(res.cubes) == 1
    # the sup bound needs alpha above the root average, so it fails here
    cert = res.certificates["good_part_sup"]
    assert not cert.passed and cert.note
    assert res.certificates["reconstruction"].passed


@settings(max_examples=25, deadline=None)
@given(
    arrays(float, 64, elements=st.floats(-100, 100)),
    st.floats(0.1, 50),
    st.sampled_from([1.0, 2.0, 3.0]),
    st.booleans(),
)
def test_cz_certificates_property(x, alpha, p0, weighted):
    g = Grid(1, 6)
    f = GridFunction(g, x)
    meas = Measure.weighted(sample(Expr("power", alpha=0.5), g)) if weighted else None
    d = meas.density if weighted else np.ones(64)
    root = ((np.abs(x) ** p0 * d).sum() / d.sum()) ** (1 / p0)
    alpha = max(alpha, root * 1.001 + 1e-9)
    res = cz_decompose(f, p0, alpha, meas)
    assert res.all_passed, {k: c for k, c in res.certificates.items() if not c.passed}
    d = res.to_dict()
    assert d["mode"] == "CLASSICAL" and len(d["cubes"]) == len(res.cubes)


@settings(max_examples=10, deadline=None)
@given(arrays(float, (16, 16), elements=st.floats(-10, 10)), st.floats(0.5, 20))
def test_cz_2d_property(x, alpha):
    alpha = max(alpha, np.abs(x).mean() * 1.001 + 1e-9)
    res = cz_decompose(GridFunction(Grid(2, 4), x), 1.0, alpha)
    assert res.all_passed


def test_cz_errors():
    f = GridFunction(Grid(1, 3), np.ones(8))
    with pytest.raises(ValueError):
        cz_decompose(f, 1.0, 0.0)
    with pytest.raises(ValueError):
        cz_decompose(f, 0.5, 1.0)


def _brute_dist(mask):
    # Chebyshev index distance from each Omega cell to the nearest F cell
    pts_f = np.argwhere(~mask)
    out = np.zeros(mask.shape)
    for p in np.argwhere(mask):
        out[tuple(p)] = np.abs(pts_f - p).max(axis=1).min()
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2**31 - 1), st.floats(0.2, 0.97))
def test_whitney_exhaustive(dim, seed, density):
    g = Grid(dim, 6 if dim == 1 else 4)
    rng = np.random.default_rng(seed)
    mask = rng.random(g.shape) < density
    if mask.all():
        mask.flat[0] = False
    cover = whitney(mask, g)
    certs = cover.verify()
    assert all(c.passed for c in certs.values())
    # independent distance oracle
    dist = _brute_dist(mask)
    for q in cover.cubes:
        dmin = dist[q.slices()].min()
        assert q.side <= dmin < 4 * q.side
    cnt = np.zeros(g.shape, int)
    for q in cover.cubes:
        cnt[q.slices()] += 1
    assert np.array_equal(cnt, mask.astype(int))


def test_whitney_edge_cases():
    g = Grid(1, 4)
    assert whitney(np.zeros(16, bool), g).cubes == []
    with pytest.raises(ValueError):
        whitney(np.ones(16, bool), g)


def test_partition_of_unity():
    g = Grid(2, 5)
    rng = np.random.default_rng(1)
    mask = np.ones(g.shape, bool)
    mask[rng.integers(0, 32, 6), rng.integers(0, 32, 6)] = False
    pu = partition_of_unity(whitney(mask, g))
    np.testing.assert_allclose(pu.total()[mask], 1.0, atol=1e-12)
    assert np.all(pu.total()[~mask] == 0.0)
    assert pu.raw_gradient_constant < 2.0 + 1e-12
    assert np.isfinite(pu.gradient_constant)
    for lf in pu.functions:
        assert lf.values.min() >= 0.0


def test_gradient_linear():
    g = Grid(1, 5)
    f = sample(Expr("ramp", a=0.0, b=1.0, slope=3.0), g)
    np.testing.assert_allclose(gradient(f)[0].values, 3.0)
    g2 = Grid(2, 4)
    f2 = sample(lambda x: 2 * x[0] - x[1], g2)
    gx, gy = gradient(f2)
    np.testing.assert_allclose(gx.values, 2.0, atol=1e-12)
    np.testing.assert_allclose(gy.values, -1.0, atol=1e-12)
    np.testing.assert_allclose(gradient_norm(f2).values, np.sqrt(5.0), atol=1e-12)


@pytest.mark.parametrize("L", [8, 9, 10])
def test_gradient_cz_ramp(L):
    f = sample(Expr("ramp", a=0.25, b=0.75, slope=2.0), Grid(1, L))
    res = gradient_cz_decompose(f, 1.0, 1.0, q=2.0)
    assert res.all_passed
    assert res.certificates["gradient_good_part"].measured <= 50
    assert "bad_part_q_average_constant" in res.extras


def test_gradient_cz_collar_halves():
    coll = []
    for L in (8, 9, 10):
        f = sample(Expr("ramp", a=0.3, b=0.6, slope=1.0), Grid(1, L))
        coll.append(gradient_cz_decompose(f, 1.0, 0.5).extras["collar_measure"])
    assert coll[1] / coll[0] == pytest.approx(0.5) and coll[2] / coll[1] == pytest.approx(0.5)


def test_gradient_cz_2d_and_weighted():
    g = Grid(2, 5)
    f = sample(Expr("bump", center=[0.5, 0.5], width=0.3), g)
    res = gradient_cz_decompose(f, 2.0, 6.0)
    assert res.all_passed and len(res.cubes) > 0
    w = Measure.weighted(sample(Expr("power", alpha=0.5), Grid(1, 8)))
    f1 = sample(Expr("ramp", a=0.25, b=0.75, slope=2.0), Grid(1, 8))
    assert gradient_cz_decompose(f1, 1.0, 2.0, w).all_passed
    with pytest.raises(ValueError):
        gradient_cz_decompose(f1, 1.0, 1.0, w)


def test_gradient_cz_no_level_set_and_errors():
    g = Grid(1, 6)
    f = sample(Expr("ramp", a=0.25, b=0.75, slope=1.0), g)
    res = gradient_cz_decompose(f, 1.0, 100.0)
    assert res.cubes == [] and res.all_passed
    with pytest.raises(ValueError):
        gradient_cz_decompose(f, 1.0, 1e-6)
    with pytest.raises(ValueError):
        gradient_cz_decompose(f, 0.5, 1.0)


def test_poincare_linear_exact():
    g = Grid(1, 8)
    f = sample(Expr("ramp", a=0.0, b=1.0, slope=1.0), g)
    assert poincare_check(None, 1.0, 1.0, CubeFamily.DYADIC, [f]) == pytest.approx(0.25, rel=1e-9)


def test_poincare_finite_on_suite():
    g = Grid(1, 8)
    suite = [sample(Expr("sin", k=k), g) for k in (1, 2, 5)]
    w = Measure.weighted(sample(Expr("power", alpha=0.5), g))
    c1 = poincare_check(None, 1.0, 2.0, CubeFamily.DYADIC, suite)
    c2 = poincare_check(w, 1.0, 1.0, CubeFamily.ALL, suite)
    assert 0 < c1 < 10 and 0 < c2 < 10
    with pytest.raises(ValueError):
        poincare_check(None, 2.0, 1.0, CubeFamily.DYADIC, suite)
