"""Calderón-Zygmund and Whitney decompositions on the grid.

Two decompositions are provided:

* :func:`cz_decompose` is the classical dyadic stopping time for ``|f|^p0``.
* :func:`gradient_cz_decompose` splits at the level set of ``M(|grad f|^p)``
  using Whitney cubes and a Lipschitz partition of unity, so the good part
  has bounded gradient instead of bounded size.

Every result carries a ``certificates`` map.  Each certificate records the
bound, the measured value and whether the check passed.

Distances between cells are Chebyshev index distances.  Adjacent cells are
at distance 1, and the domain boundary does not count as part of the
complement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_cdt

from .grid import Cube, CubeFamily, Grid, GridFunction, Measure, box_slices, family_anchors, family_sides
from .maximal import maximal

__all__ = [
    "Certificate",
    "CZMode",
    "BadPart",
    "CZResult",
    "WhitneyCover",
    "LocalFunction",
    "cz_decompose",
    "whitney",
    "partition_of_unity",
    "gradient",
    "gradient_norm",
    "gradient_cz_decompose",
    "poincare_check",
]


@dataclass(frozen=True)
class Certificate:
    bound: float
    measured: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "bound": _jnum(self.bound),
            "measured": _jnum(self.measured),
            "passed": bool(self.passed),
            "note": self.note,
        }


def _jnum(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _cert(bound, measured, slack=1e-12, note=""):
    return Certificate(float(bound), float(measured), bool(measured <= bound * (1 + slack) + slack), note)


class CZMode(str, enum.Enum):
    CLASSICAL = "CLASSICAL"
    GRADIENT = "GRADIENT"


@dataclass(frozen=True)
class LocalFunction:
    """Values on a clipped box ``((lo, hi), ...)``; zero elsewhere."""

    box: tuple
    values: np.ndarray

    def to_grid(self, grid: Grid) -> GridFunction:
        out = np.zeros(grid.shape)
        out[box_slices(self.box)] = self.values
        return GridFunction(grid, out)

    def add_into(self, arr: np.ndarray, sign: float = 1.0) -> None:
        arr[box_slices(self.box)] += sign * self.values


@dataclass(frozen=True)
class BadPart:
    cube: Cube
    b: LocalFunction


@dataclass
class CZResult:
    """``f = g + sum_i b_i`` with named certificates."""

    f: GridFunction
    g: GridFunction
    bad_parts: list
    height: float
    mode: CZMode
    certificates: dict
    extras: dict = field(default_factory=dict)

    @property
    def cubes(self) -> list:
        return [bp.cube for bp in self.bad_parts]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.certificates.values())

    def bad_sum(self) -> np.ndarray:
        acc = np.zeros(self.f.grid.shape)
        for bp in self.bad_parts:
            bp.b.add_into(acc)
        return acc

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "height": self.height,
            "grid": {"dim": self.f.grid.dim, "level": self.f.grid.level},
            "cubes": [bp.cube.to_dict() for bp in self.bad_parts],
            "certificates": {k: v.to_dict() for k, v in sorted(self.certificates.items())},
            "extras": self.extras,
        }


# ---------------------------------------------------------------------------
# classical decomposition
# ---------------------------------------------------------------------------


def _block_sum(a: np.ndarray, k: int) -> np.ndarray:
    n = a.shape[0] // k
    if a.ndim == 1:
        return a.reshape(n, k).sum(axis=1)
    return a.reshape(n, k, n, k).sum(axis=(1, 3))


def _density(grid: Grid, measure: Measure | None) -> np.ndarray:
    if measure is None:
        return np.ones(grid.shape)
    if measure.grid != grid:
        raise ValueError("measure lives on a different grid")
    return measure.density


def _cube_iter(grid, s, mask):
    """Cubes of side ``s`` whose coarse-index entry in ``mask`` is set."""
    for idx in zip(*np.nonzero(mask)):
        yield Cube(tuple(int(i) * s for i in idx), s)


def cz_decompose(f: GridFunction, p0: float, alpha: float, measure: Measure | None = None) -> CZResult:
    """Dyadic stopping time for ``|f|^p0`` at height ``alpha^p0``.

    Stopping cubes are the maximal dyadic cubes with
    ``avg_Q |f|^p0 dmu > alpha^p0``.  On each, ``b_i = (f - m_Q f) chi_Q``
    with ``m_Q`` the ``mu``-average, and ``g = f - sum b_i``.  If the whole
    domain exceeds the height it is the single stopping cube.
    """
    if not alpha > 0:
        raise ValueError("height alpha must be positive")
    if p0 < 1:
        raise ValueError("p0 must be >= 1")
    grid = f.grid
    meas = measure if measure is not None else Measure.lebesgue(grid)
    d = _density(grid, measure)
    a = np.abs(f.values) ** p0
    thr = alpha**p0
    x = f.values
    covered = np.zeros(grid.shape, bool)
    parts = []
    for k in range(grid.level + 1):
        s = grid.n >> k  # side in cells at depth k
        num = _block_sum(a * d, s)
        den = _block_sum(d, s)
        avg = num / den
        cov = _block_sum(covered.astype(np.int64), s) > 0
        sel = (avg > thr) & ~cov
        for q in _cube_iter(grid, s, sel):
            sl = q.slices()
            covered[sl] = True
            w = d[sl]
            m = float((x[sl] * w).sum() / w.sum())
            parts.append(BadPart(q, LocalFunction(tuple((lo, lo + s) for lo in q.anchor), x[sl] - m)))
    bsum = np.zeros(grid.shape)
    for bp in parts:
        bp.b.add_into(bsum)
    g = x - bsum
    res = CZResult(f, GridFunction(grid, g), parts, float(alpha), CZMode.CLASSICAL, {})
    res.certificates = _classical_certificates(res, p0, meas, d)
    res.extras["doubling_order"] = meas.doubling_order
    res.extras["root_stopped"] = bool(parts and parts[0].cube.side == grid.n)
    return res


def _classical_certificates(res: CZResult, p0: float, meas: Measure, d: np.ndarray) -> dict:
    grid = res.f.grid
    alpha = res.height
    D = meas.doubling_order
    c = 2.0 ** (D / p0)
    recon = np.abs(res.f.values - res.g.values - res.bad_sum()).max()
    certs = {
        "reconstruction": _cert(1e-12, recon, slack=0.0),
        "good_part_sup": _cert(c * alpha, np.abs(res.g.values).max()),
    }
    if res.bad_parts and res.bad_parts[0].cube.side == grid.n:
        # the sup bound presumes the height exceeds the root average
        certs["good_part_sup"] = _cert(c * alpha, np.abs(res.g.values).max(), note="height below root average")
    hi = 0.0
    total = 0.0
    cover = np.zeros(grid.shape, np.int64)
    for bp in res.bad_parts:
        sl = bp.cube.slices()
        w = d[sl]
        hi = max(hi, float(((np.abs(bp.b.values) ** p0 * w).sum() / w.sum()) ** (1.0 / p0)))
        total += float(w.sum() * grid.cell_measure)
        cover[sl] += 1
    certs["bad_part_average"] = _cert(2.0 * c * alpha, hi)
    norm = float((np.abs(res.f.values) ** p0 * d).sum() * grid.cell_measure)
    certs["cube_measure"] = _cert(norm / alpha**p0, total)
    certs["overlap"] = _cert(1.0, float(cover.max()) if res.bad_parts else 0.0, slack=0.0)
    return certs


# ---------------------------------------------------------------------------
# Whitney cover and partition of unity
# ---------------------------------------------------------------------------


def _distance_to_complement(mask: np.ndarray) -> np.ndarray:
    """Chebyshev index distance from each cell to the nearest cell outside ``mask``."""
    return distance_transform_cdt(mask, metric="chessboard").astype(np.int64)


@dataclass
class WhitneyCover:
    """Disjoint dyadic cubes ``Q`` covering ``mask`` with ``side <= dist(Q, F) < 4 side``."""

    grid: Grid
    cubes: list
    mask: np.ndarray

    def collar(self, cube: Cube, factor: float = 2.0) -> tuple:
        return cube.dilate_box(factor, self.grid)

    def verify(self) -> dict:
        """Certificates for disjointness, exact union, distances and dilates."""
        grid = self.grid
        mask = self.mask
        count = np.zeros(grid.shape, np.int64)
        count2 = np.zeros(grid.shape, np.int64)
        dist = _distance_to_complement(mask) if mask.any() else None
        lower_fail = upper_ratio = 0.0
        double_inside = True
        four_hits = 0
        need = 0.0
        for q in self.cubes:
            count[q.slices()] += 1
            box2 = q.dilate_box(2.0, grid)
            count2[box_slices(box2)] += 1
            double_inside &= bool(mask[box_slices(box2)].all())
            dmin = float(dist[q.slices()].min())
            lower_fail = max(lower_fail, q.side - dmin)
            upper_ratio = max(upper_ratio, dmin / (4.0 * q.side))
            four_hits += int(not mask[box_slices(q.dilate_box(4.0, grid))].all())
            # smallest dilation factor whose clipped collar reaches F
            need = max(need, 1.0 + 2.0 * dmin / q.side)
        union_ok = bool(np.array_equal(count > 0, mask))
        n = len(self.cubes)
        return {
            "disjoint": _cert(1.0, float(count.max()) if n else 0.0, slack=0.0),
            "union": Certificate(0.0, 0.0 if union_ok else 1.0, union_ok),
            "lower_distance": _cert(0.0, lower_fail, slack=0.0, note="side - dist(Q, F) <= 0"),
            "upper_distance": Certificate(1.0, upper_ratio, upper_ratio < 1.0, "dist(Q, F) / (4 side) < 1"),
            "double_inside": Certificate(1.0, 1.0 if double_inside else 0.0, double_inside),
            "double_overlap": _cert(8.0 if grid.dim == 1 else 16.0, float(count2.max()) if n else 0.0, slack=0.0),
            "four_dilate_hits_F": Certificate(
                float(n), float(four_hits), True,
                "advisory: count of cubes whose clipped 4Q meets F; max dilation needed = %.3f" % need,
            ),
        }


def whitney(mask, grid: Grid) -> WhitneyCover:
    """Greedy maximal dyadic cubes with ``side <= dist(Q, F)``.

    Processing from the root downwards, a dyadic cube inside the open set is
    selected when its minimum Chebyshev distance to ``F`` is at least its
    side and no ancestor was selected.  A selected cube's parent failed the
    test, which caps the distance below ``3 * side``.
    """
    mask = np.asarray(mask, dtype=bool).reshape(grid.shape)
    if mask.all():
        raise ValueError("the open set is the whole domain; a Whitney cover needs a non-empty complement")
    cubes = []
    if not mask.any():
        return WhitneyCover(grid, cubes, mask)
    dist = _distance_to_complement(mask)
    covered = np.zeros(grid.shape, bool)
    inside = mask.astype(np.int64)
    for k in range(grid.level + 1):
        s = grid.n >> k
        full = _block_sum(inside, s) == s**grid.dim
        dmin = _block_min(np.where(mask, dist, 0), s)
        cov = _block_sum(covered.astype(np.int64), s) > 0
        sel = full & (dmin >= s) & ~cov
        for q in _cube_iter(grid, s, sel):
            covered[q.slices()] = True
            cubes.append(q)
    return WhitneyCover(grid, cubes, mask)


def _block_min(a, k):
    n = a.shape[0] // k
    if a.ndim == 1:
        return a.reshape(n, k).min(axis=1)
    return a.reshape(n, k, n, k).min(axis=(1, 3))


def _trapezoid_profile(lo, hi, s, collar, axis_lo, axis_hi):
    """1D trapezoid on ``[axis_lo, axis_hi)``: 1 on ``[lo, hi)``, ramp on the collar."""
    idx = np.arange(axis_lo, axis_hi)
    dist = np.maximum(lo - idx, idx - (hi - 1))
    dist = np.maximum(dist, 0)
    return np.clip(1.0 - dist / (collar + 1.0), 0.0, 1.0)


def _raw_bump(q: Cube, grid: Grid):
    box = q.dilate_box(2.0, grid)
    collar = int(math.floor(q.side / 2.0 + 1e-12))
    profs = [
        _trapezoid_profile(a, a + q.side, q.side, collar, lo, hi)
        for a, (lo, hi) in zip(q.anchor, box)
    ]
    vals = profs[0] if grid.dim == 1 else np.multiply.outer(profs[0], profs[1])
    return box, vals


@dataclass
class PartitionOfUnity:
    cover: WhitneyCover
    functions: list  # LocalFunction per cube, normalized
    raw_gradient_constant: float  # max_i l_i |grad chi_i| before normalization
    gradient_constant: float  # after normalization

    def as_grid_functions(self) -> list:
        return [lf.to_grid(self.cover.grid) for lf in self.functions]

    def total(self) -> np.ndarray:
        acc = np.zeros(self.cover.grid.shape)
        for lf in self.functions:
            lf.add_into(acc)
        return acc


def partition_of_unity(cover: WhitneyCover) -> PartitionOfUnity:
    """Trapezoid bumps on ``2Q_i`` normalized to sum to one on the open set.

    Each raw bump equals 1 on ``Q_i`` and decreases by ``1/(c+1)`` per cell
    across a collar of ``c = floor(side/2)`` cells, so ``l_i |grad| < 2``
    before normalization.
    """
    grid = cover.grid
    if not cover.cubes:
        raise ValueError("empty cover")
    raw = [_raw_bump(q, grid) for q in cover.cubes]
    total = np.zeros(grid.shape)
    raw_c = 0.0
    for q, (box, vals) in zip(cover.cubes, raw):
        total[box_slices(box)] += vals
        lf = LocalFunction(box, vals).to_grid(grid)
        raw_c = max(raw_c, q.side * grid.h * float(gradient_norm(lf).values.max()))
    funcs = []
    norm_c = 0.0
    for q, (box, vals) in zip(cover.cubes, raw):
        v = vals / total[box_slices(box)]
        lf = LocalFunction(box, v)
        funcs.append(lf)
        norm_c = max(norm_c, q.side * grid.h * _local_grad_max(lf, grid))
    return PartitionOfUnity(cover, funcs, raw_c, norm_c)


def _local_grad_max(lf: LocalFunction, grid: Grid) -> float:
    # pad by one cell so differences across the support edge are seen
    box = tuple((max(0, lo - 1), min(grid.n, hi + 1)) for lo, hi in lf.box)
    sub = np.zeros(tuple(hi - lo for lo, hi in box))
    inner = tuple(slice(a - lo, a - lo + (b - a)) for (a, b), (lo, _) in zip(lf.box, box))
    sub[inner] = lf.values
    return float(_grad_norm_array(sub, grid.h).max())


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def _diff_axis(x: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = x.shape[axis]
    if n < 2:
        return np.zeros_like(x)
    d = np.diff(x, axis=axis) / h
    last = np.take(d, [n - 2], axis=axis)
    return np.concatenate([d, last], axis=axis)


def gradient(f: GridFunction) -> list:
    """Forward differences per axis; the last cell uses the backward difference."""
    return [f.like(_diff_axis(f.values, ax, f.grid.h)) for ax in range(f.grid.dim)]


def _grad_norm_array(x, h):
    comps = [_diff_axis(x, ax, h) for ax in range(x.ndim)]
    return np.sqrt(sum(c * c for c in comps))


def gradient_norm(f: GridFunction) -> GridFunction:
    return f.like(_grad_norm_array(f.values, f.grid.h))


def _boundary_collar(mask: np.ndarray) -> np.ndarray:
    """Cells within Chebyshev distance 1 of the interface between ``mask`` and its complement."""
    if not mask.any() or mask.all():
        return np.zeros_like(mask)
    d_in = distance_transform_cdt(mask, metric="chessboard")
    d_out = distance_transform_cdt(~mask, metric="chessboard")
    return (mask & (d_in <= 1)) | (~mask & (d_out <= 1))


def gradient_cz_decompose(
    f: GridFunction,
    p: float,
    alpha: float,
    measure: Measure | None = None,
    *,
    family=CubeFamily.DYADIC,
    q: float | None = None,
    pair_seed: int = 0,
    max_pairs: int = 200_000,
) -> CZResult:
    """Decomposition with gradient control on the good part.

    ``Omega = {M_mu(|grad f|^p) > alpha^p}`` over ``family``.  With a Whitney
    cover ``{Q_i}`` of Omega and the partition of unity ``{chi_i}``,
    ``b_i = (f - m_{2Q_i} f) chi_i`` and ``g = f - sum b_i``.  The gradient
    certificate excludes cells within one cell of the interface between
    Omega and its complement.
    """
    if not alpha > 0:
        raise ValueError("height alpha must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = f.grid
    meas = measure if measure is not None else Measure.lebesgue(grid)
    d = _density(grid, measure)
    gnorm = gradient_norm(f).values
    G = GridFunction(grid, gnorm**p)
    mg = maximal(G, family, None if measure is None else measure).values
    omega = mg > alpha**p
    if omega.all():
        raise ValueError(
            "the level set covers the whole domain; choose a larger height alpha"
        )
    x = f.values
    if not omega.any():
        res = CZResult(f, f, [], float(alpha), CZMode.GRADIENT, {})
        res.certificates = _gradient_certificates(res, None, omega, p, meas, d, q, pair_seed, max_pairs)
        res.extras.update({"omega_measure": 0.0, "n_cubes": 0})
        return res
    cover = whitney(omega, grid)
    pu = partition_of_unity(cover)
    parts = []
    means = []
    for qc, lf in zip(cover.cubes, pu.functions):
        sl = box_slices(lf.box)
        w = d[sl]
        m = float((x[sl] * w).sum() / w.sum())
        means.append(m)
        parts.append(BadPart(qc, LocalFunction(lf.box, (x[sl] - m) * lf.values)))
    bsum = np.zeros(grid.shape)
    for bp in parts:
        bp.b.add_into(bsum)
    g = GridFunction(grid, x - bsum)
    res = CZResult(f, g, parts, float(alpha), CZMode.GRADIENT, {})
    res.certificates = _gradient_certificates(res, (cover, pu, means), omega, p, meas, d, q, pair_seed, max_pairs)
    res.extras.update(
        {
            "omega_measure": float(omega.sum() * grid.cell_measure),
            "n_cubes": len(parts),
            "pu_raw_gradient_constant": pu.raw_gradient_constant,
            "pu_gradient_constant": pu.gradient_constant,
            "family": CubeFamily.parse(family).value,
        }
    )
    return res


def _gradient_certificates(res, built, omega, p, meas, d, q, pair_seed, max_pairs):
    grid = res.f.grid
    alpha = res.height
    h = grid.h
    certs = {}
    recon = np.abs(res.f.values - res.g.values - res.bad_sum()).max() if res.bad_parts else 0.0
    certs["reconstruction"] = _cert(1e-12, recon, slack=0.0)
    collar = _boundary_collar(omega)
    grad_g = gradient_norm(res.g).values
    off = ~collar
    cmeas = float(collar.sum() * grid.cell_measure)
    gmax = float(grad_g[off].max() / alpha) if off.any() else 0.0
    certs["gradient_good_part"] = _cert(50.0, gmax, slack=0.0, note="max |grad g| / alpha off the collar")
    res.extras["collar_measure"] = cmeas
    Gint = float((gradient_norm(res.f).values ** p * d).sum() * grid.cell_measure)
    if built is None:
        certs["support"] = Certificate(0.0, 0.0, True)
        certs["overlap"] = _cert(8.0 if grid.dim == 1 else 16.0, 0.0, slack=0.0)
        certs["double_cube_measure"] = Certificate(0.0, 0.0, True, "no cubes")
    else:
        cover, pu, means = built
        ok = all(
            bp.b.box == bp.cube.dilate_box(2.0, grid) for bp in res.bad_parts
        )
        certs["support"] = Certificate(0.0, 0.0 if ok else 1.0, ok, "supp b_i inside clipped 2Q_i")
        cnt = np.zeros(grid.shape, np.int64)
        tot2 = 0.0
        ratio = 1.0
        for bp in res.bad_parts:
            box = bp.b.box
            cnt[box_slices(box)] += 1
            m2 = float(d[box_slices(box)].sum() * grid.cell_measure)
            m1 = float(d[bp.cube.slices()].sum() * grid.cell_measure)
            tot2 += m2
            ratio = max(ratio, m2 / m1)
        certs["overlap"] = _cert(8.0 if grid.dim == 1 else 16.0, float(cnt.max()), slack=0.0)
        measured = tot2 * alpha**p / Gint if Gint > 0 else 0.0
        certs["double_cube_measure"] = _cert(
            ratio, measured, note="sum mu(2Q_i) alpha^p / int |grad f|^p dmu <= max mu(2Q)/mu(Q)"
        )
        # sum_i grad chi_i vanishes inside Omega away from the collar
        acc = [np.zeros(grid.shape) for _ in range(grid.dim)]
        aux = [np.zeros(grid.shape) for _ in range(grid.dim)]
        for lf, m in zip(pu.functions, means):
            full = lf.to_grid(grid)
            for ax, comp in enumerate(gradient(full)):
                acc[ax] += comp.values
                aux[ax] += m * comp.values
        inner = omega & ~collar
        s_grad = max((np.abs(a[inner]).max() if inner.any() else 0.0) for a in acc)
        certs["partition_gradient_sum"] = _cert(1e-9, s_grad * h, slack=0.0, note="h * max |sum grad chi_i| inside")
        res.extras["aux_h_sup_over_alpha"] = float(
            np.sqrt(sum(a * a for a in aux))[inner].max() / alpha
        ) if inner.any() else 0.0
        if q is not None:
            worst = 0.0
            for bp in res.bad_parts:
                w = d[box_slices(bp.b.box)]
                avg = ((np.abs(bp.b.values) ** q * w).sum() / w.sum()) ** (1.0 / q)
                worst = max(worst, avg / (alpha * bp.cube.side * h))
            res.extras["bad_part_q_average_constant"] = float(worst)
    certs["lipschitz_on_F"] = _lipschitz_on_F(res.g, ~omega, alpha, pair_seed, max_pairs)
    return certs


def _lipschitz_on_F(g: GridFunction, F: np.ndarray, alpha: float, seed: int, max_pairs: int) -> Certificate:
    """``|g(x) - g(y)| <= C alpha (|x - y| + h)`` over pairs in ``F``."""
    grid = g.grid
    pts = np.argwhere(F)
    vals = g.values[F]
    n = len(pts)
    if n < 2:
        return Certificate(50.0, 0.0, True, "fewer than two cells in F")
    h = grid.h
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, max_pairs)
        j = rng.integers(0, n, max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    dist = np.sqrt(((pts[i] - pts[j]) ** 2).sum(axis=1)) * h
    c = float((np.abs(vals[i] - vals[j]) / (alpha * (dist + h))).max())
    return _cert(50.0, c, slack=0.0, note="sampled pairs in F")


# ---------------------------------------------------------------------------
# Poincaré
# ---------------------------------------------------------------------------


def poincare_check(
    measure: Measure | None,
    p: float,
    q: float,
    family,
    suite,
    *,
    grid: Grid | None = None,
    min_side: int = 2,
) -> float:
    """Empirical Poincaré constant over a suite of test functions.

    ``max (avg_Q |f - m_Q f|^q dmu)^{1/q} / (r(Q) (avg_Q |grad f|^p dmu)^{1/p})``
    over the family, with radius ``r(Q) = side * h`` (the full sidelength).
    For a linear function in 1D with ``p = q = 1`` the ratio is exactly
    ``1/4`` on every even-sided interval.  Cubes with vanishing gradient
    average are skipped.
    """
    if not (q >= p >= 1):
        raise ValueError("need q >= p >= 1")
    best = 0.0
    for f in suite:
        gr = f.grid
        if grid is not None and gr != grid:
            raise ValueError("suite functions must share one grid")
        d = _density(gr, measure)
        x = f.values - f.values.mean()
        gp = gradient_norm(f).values ** p
        for s in family_sides(gr, family):
            if s < min_side:
                continue
            idx = family_anchors(gr, family, s)
            xv = _windows(x, s, idx, gr.dim)
            dv = _windows(d, s, idx, gr.dim)
            gv = _windows(gp, s, idx, gr.dim)
            axes = tuple(range(-gr.dim, 0))
            dsum = dv.sum(axis=axes)
            mean = (xv * dv).sum(axis=axes, keepdims=True) / dsum.reshape(dsum.shape + (1,) * gr.dim)
            osc = ((np.abs(xv - mean) ** q * dv).sum(axis=axes) / dsum) ** (1.0 / q)
            grad = ((gv * dv).sum(axis=axes) / dsum) ** (1.0 / p)
            ok = grad > 1e-300
            if ok.any():
                ratio = osc[ok] / (s * gr.h * grad[ok])
                best = max(best, float(ratio.max()))
    return best


def _windows(x, s, idx, dim):
    from numpy.lib.stride_tricks import sliding_window_view

    if dim == 1:
        return sliding_window_view(x, s)[idx]
    v = sliding_window_view(x, (s, s))
    return v[idx[:, None], idx[None, :]]
