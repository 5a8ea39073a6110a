"""Muckenhoupt and reverse Hölder characteristics and critical exponents.

Characteristics are computed in the log domain: the weight is first divided
by its geometric mean and powers such as ``w**(1-p')`` are shifted by their
maximum before exponentiation, then the shift is added back after taking
logs.  That keeps weights like ``x**1.5`` sampled at ``L = 13`` well inside
float64 range for every exponent the estimator uses.

The exponent estimator follows a divergence-under-refinement protocol.
For a characteristic ``c_L`` measured at consecutive levels, the growth
rate ``beta = log2(c_L / c_{L-1})`` is the number of extra factors of two
the characteristic gains per refinement.  Power-type singularities give

* ``beta(p) = r_w - p`` for ``A_p`` with ``p < r_w``,
* ``beta(q) = 1/s_w - 1/q`` for ``RH_q`` with ``q > s_w``,

so each divergent exponent yields a point estimate and the convergent
ones bracket it.  See :func:`estimate_exponents`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._windows import iter_windows
from .grid import CubeFamily, Expr, Grid, GridFunction, coarsen, sample
from .maximal import maximal

__all__ = [
    "Status",
    "FactoryKind",
    "WeightFactorySpec",
    "FactoryWeight",
    "ExponentEstimate",
    "WeightReport",
    "conj",
    "ap_characteristic",
    "rh_characteristic",
    "dual_weight",
    "duality_exponent_check",
    "prop_vii_transform",
    "build_weight",
    "estimate_exponents",
    "ww_interval",
]

INF = math.inf


def conj(x: float) -> float:
    """Hölder conjugate with ``1' = inf`` and ``inf' = 1``."""
    if x == 1:
        return INF
    if math.isinf(x):
        return 1.0
    return x / (x - 1.0)


def _div(a: float, b: float) -> float:
    if math.isinf(b):
        return INF if math.isinf(a) else 0.0
    return a / b


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------


def _weight_values(w) -> np.ndarray:
    v = w.values if isinstance(w, GridFunction) else np.asarray(w, dtype=float)
    if not np.all(v > 0):
        raise ValueError("weights must be strictly positive")
    return v


def _shifted_exp(lw: np.ndarray, t: float):
    """``exp(t*lw)`` as ``(array, shift)`` with the array's max equal to 1."""
    z = t * lw
    shift = float(z.max())
    out = np.exp(z - shift)
    return out, shift


def _check_sums(*arrs):
    for a in arrs:
        if np.any(a <= 0):
            raise FloatingPointError(
                "weight powers span more than float64 range; reduce the exponent or level"
            )


def ap_characteristic(w: GridFunction, p: float, family=CubeFamily.ALL) -> float:
    """``sup_Q (avg_Q w)(avg_Q w^{1-p'})^{p-1}``; ``p = 1`` uses ``avg_Q w / min_Q w``."""
    if not p >= 1:
        raise ValueError(f"A_p needs p >= 1, got {p}")
    grid = w.grid
    lw = np.log(_weight_values(w))
    lw = lw - lw.mean()
    vol = lambda s: float(s**grid.dim)
    best = -INF
    if p == 1:
        a, sa = _shifted_exp(lw, 1.0)
        for s, _, S, lo, _ in iter_windows(grid, family, sums=a[None], mins=a[None]):
            _check_sums(S, lo)
            val = np.log(S[0] / vol(s)) - np.log(lo[0])
            best = max(best, float(val.max()))
        return float(math.exp(best))
    if math.isinf(p):
        raise ValueError("p must be finite")
    t = 1.0 - conj(p)
    a, sa = _shifted_exp(lw, 1.0)
    b, sb = _shifted_exp(lw, t)
    for s, _, S, _, _ in iter_windows(grid, family, sums=np.stack([a, b])):
        _check_sums(S)
        v = vol(s)
        val = np.log(S[0] / v) + sa + (p - 1.0) * (np.log(S[1] / v) + sb)
        best = max(best, float(val.max()))
    return float(math.exp(best))


def rh_characteristic(w: GridFunction, q: float, family=CubeFamily.ALL) -> float:
    """``sup_Q (avg_Q w^q)^{1/q} / avg_Q w``; ``q = inf`` uses ``max_Q w``."""
    if not q > 1:
        raise ValueError(f"RH_q needs q > 1, got {q}")
    grid = w.grid
    lw = np.log(_weight_values(w))
    lw = lw - lw.mean()
    vol = lambda s: float(s**grid.dim)
    best = -INF
    a, sa = _shifted_exp(lw, 1.0)
    if math.isinf(q):
        for s, _, S, _, hi in iter_windows(grid, family, sums=a[None], maxs=a[None]):
            _check_sums(S)
            val = np.log(hi[0]) - np.log(S[0] / vol(s))
            best = max(best, float(val.max()))
        return float(math.exp(best))
    b, sb = _shifted_exp(lw, q)
    for s, _, S, _, _ in iter_windows(grid, family, sums=np.stack([a, b])):
        _check_sums(S)
        v = vol(s)
        val = (np.log(S[1] / v) + sb) / q - (np.log(S[0] / v) + sa)
        best = max(best, float(val.max()))
    # Jensen forces >= 1; rounding can dip a hair below on constant weights
    return float(max(math.exp(best), 1.0))


def dual_weight(w: GridFunction, p: float) -> GridFunction:
    """``w^{1-p'}``."""
    if not p > 1:
        raise ValueError(f"dual weight needs p > 1, got {p}")
    v = _weight_values(w)
    return w.like(np.exp((1.0 - conj(p)) * np.log(v)))


def duality_exponent_check(p0: float, q0: float, p: float, tol: float = 1e-12) -> dict:
    """Exponent bookkeeping behind the duality ``W_w(p0,q0) <-> W_{w^{1-p'}}(q0', p0')``.

    With ``q = (q0/p)'(p/p0 - 1) + 1`` both identities

    * ``(q0/p)'(1 - q') = (1 - p')((p0)'/p')'``
    * ``q' = ((p0)'/p')'(p'/(q0)' - 1) + 1``

    are evaluated with the conventions ``x/inf = 0``, ``1' = inf``, ``inf' = 1``.
    """
    if not (p0 <= p <= q0) or not 1 < p < INF:
        raise ValueError("need p0 <= p <= q0 with 1 < p < inf")
    pp = conj(p)
    s = conj(_div(q0, p))
    q = s * (p / p0 - 1.0) + 1.0
    qp = conj(q)
    p0p = conj(p0)
    q0p = conj(q0)
    t = conj(_div(p0p, pp))
    lhs1 = s * (1.0 - qp)
    rhs1 = (1.0 - pp) * t
    rhs2 = t * (pp / q0p - 1.0) + 1.0
    ok1 = _close(lhs1, rhs1, tol)
    ok2 = _close(qp, rhs2, tol)
    return {
        "p0": p0,
        "q0": q0,
        "p": p,
        "p_conj": pp,
        "q0_over_p_conj": s,
        "q": q,
        "q_conj": qp,
        "p0_conj": p0p,
        "q0_conj": q0p,
        "p0conj_over_pconj_conj": t,
        "identity_1": [lhs1, rhs1],
        "identity_2": [qp, rhs2],
        "passed": bool(ok1 and ok2),
    }


def _close(a, b, tol):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def prop_vii_transform(w: GridFunction, q: float, s: float):
    """``(w^s, s(q-1)+1)``: membership in ``A_q ∩ RH_s`` transfers to ``w^s``."""
    if q < 1 or s < 1:
        raise ValueError("need q >= 1 and s >= 1")
    v = _weight_values(w)
    return w.like(np.exp(s * np.log(v))), s * (q - 1.0) + 1.0


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


class FactoryKind(str, enum.Enum):
    POWER = "power"
    MF_NEG = "mf_neg"
    MF_POS = "mf_pos"
    MF_SUM = "mf_sum"


_DIRAC = {"family": "dirac", "point": 0.0, "mass": 1.0}


@dataclass(frozen=True)
class WeightFactorySpec:
    """Closed-form weight families.

    * ``POWER(alpha)``: ``|x|^alpha``.
    * ``MF_NEG(f, r)``: ``(Mf)^{-(r-1)}``.
    * ``MF_POS(f, s)``: ``(Mf)^{1/s}``.
    * ``MF_SUM(f, g, r, s)``: ``(Mf)^{-(r-1)} + (Mg)^{1/s}``.

    ``f`` and ``g`` are analytic expressions, resampled at each level.  The
    default is a unit point mass at the origin, resolved at the cell scale,
    whose maximal function behaves like ``|x|^{-dim}``.
    """

    kind: FactoryKind
    alpha: float = 0.0
    r: float = 2.0
    s: float = 2.0
    f: Mapping = field(default_factory=lambda: dict(_DIRAC))
    g: Mapping = field(default_factory=lambda: dict(_DIRAC))

    def __post_init__(self):
        object.__setattr__(self, "kind", FactoryKind(self.kind))
        if self.kind is FactoryKind.MF_NEG and self.r < 1:
            raise ValueError("MF_NEG needs r >= 1")
        if self.kind is FactoryKind.MF_POS and not self.s > 1:
            raise ValueError("MF_POS needs s > 1")
        if self.kind is FactoryKind.MF_SUM and (self.r < 1 or not self.s > 1):
            raise ValueError("MF_SUM needs r >= 1 and s > 1")

    @classmethod
    def power(cls, alpha: float) -> "WeightFactorySpec":
        return cls(FactoryKind.POWER, alpha=alpha)

    def closed_form(self, dim: int) -> dict:
        """Closed-form ``r_w``/``s_w`` (bounds only for ``MF_SUM``)."""
        if self.kind is FactoryKind.POWER:
            a = self.alpha
            return {
                "rw": max(1.0, 1.0 + a / dim),
                "sw": INF if a >= 0 else -dim / a,
                "exact": True,
            }
        point_mass = dict(self.f).get("family") == "dirac"
        if self.kind is FactoryKind.MF_NEG:
            return {"rw": self.r, "sw": INF, "exact": point_mass}
        if self.kind is FactoryKind.MF_POS:
            return {"rw": 1.0, "sw": self.s, "exact": point_mass}
        return {"rw_upper": self.r, "sw_lower": self.s, "exact": False}

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is FactoryKind.POWER:
            d["alpha"] = self.alpha
        else:
            d["f"] = dict(self.f)
            if self.kind in (FactoryKind.MF_NEG, FactoryKind.MF_SUM):
                d["r"] = self.r
            if self.kind in (FactoryKind.MF_POS, FactoryKind.MF_SUM):
                d["s"] = self.s
            if self.kind is FactoryKind.MF_SUM:
                d["g"] = dict(self.g)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "WeightFactorySpec":
        d = dict(d)
        kind = FactoryKind(d.pop("kind"))
        return cls(kind, **d)


@dataclass(frozen=True)
class FactoryWeight:
    weight: GridFunction
    spec: WeightFactorySpec
    closed_form: dict


def _mf_family(grid: Grid) -> CubeFamily:
    if grid.dim == 1 or grid.level <= 6:
        return CubeFamily.ALL
    return CubeFamily.SHIFTED_DYADIC


def build_weight(spec: WeightFactorySpec, grid: Grid) -> FactoryWeight:
    """Sample the factory weight on ``grid`` with its closed-form exponents."""
    if spec.kind is FactoryKind.POWER:
        if spec.alpha <= -grid.dim:
            raise ValueError(f"POWER needs alpha > -{grid.dim}")
        w = sample(Expr("power", alpha=spec.alpha), grid)
        if spec.alpha == 0:
            w = w.like(np.ones(grid.shape))
    else:
        fam = _mf_family(grid)
        mf = maximal(sample(dict(spec.f), grid), fam).values
        if spec.kind is FactoryKind.MF_NEG:
            v = mf ** (-(spec.r - 1.0))
        elif spec.kind is FactoryKind.MF_POS:
            v = mf ** (1.0 / spec.s)
        else:
            mg = maximal(sample(dict(spec.g), grid), fam).values
            v = mf ** (-(spec.r - 1.0)) + mg ** (1.0 / spec.s)
        w = GridFunction(grid, v)
    return FactoryWeight(w, spec, spec.closed_form(grid.dim))


# ---------------------------------------------------------------------------
# exponent estimation
# ---------------------------------------------------------------------------


class Status(str, enum.Enum):
    CONVERGED = "CONVERGED"
    DIVERGENCE_DETECTED = "DIVERGENCE_DETECTED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class ExponentEstimate:
    """Estimate of ``r_w`` or ``s_w``.

    ``value`` is the power-model estimate; ``bracket`` is (largest divergent,
    smallest convergent) grid exponent in the direction of the class.
    ``lower_bound`` is set when ``s_w`` is reported as infinite.
    """

    value: float
    status: Status
    bracket: tuple
    tolerance: float
    lower_bound: float | None = None
    per_exponent: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": _jnum(self.value),
            "status": self.status.value,
            "bracket": [_jnum(x) for x in self.bracket],
            "tolerance": _jnum(self.tolerance),
            "lower_bound": _jnum(self.lower_bound),
            "per_exponent": {k: _jnum(v) for k, v in self.per_exponent.items()},
        }


def _jnum(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class WeightReport:
    ap_curve: list
    rh_curve: list
    rw_estimate: ExponentEstimate
    sw_estimate: ExponentEstimate
    ww_interval: tuple
    ww_empty: bool
    ww_tolerance: float
    levels_used: list
    p0: float
    q0: float
    family: str
    rho: float
    closed_form: dict | None = None

    @property
    def inconclusive(self) -> bool:
        return Status.INCONCLUSIVE in (self.rw_estimate.status, self.sw_estimate.status)

    def to_dict(self) -> dict:
        return {
            "ap_curve": [[_jnum(e), lvl, c] for e, lvl, c in self.ap_curve],
            "rh_curve": [[_jnum(e), lvl, c] for e, lvl, c in self.rh_curve],
            "rw_estimate": self.rw_estimate.to_dict(),
            "sw_estimate": self.sw_estimate.to_dict(),
            "ww_interval": [_jnum(x) for x in self.ww_interval],
            "ww_empty": self.ww_empty,
            "ww_tolerance": _jnum(self.ww_tolerance),
            "levels_used": list(self.levels_used),
            "p0": _jnum(self.p0),
            "q0": _jnum(self.q0),
            "family": self.family,
            "divergence_factor": self.rho,
            "closed_form": None
            if self.closed_form is None
            else {k: _jnum(v) if not isinstance(v, bool) else v for k, v in self.closed_form.items()},
        }


def ww_interval(rw: float, sw: float, p0: float, q0: float) -> tuple:
    """``(p0 * r_w, q0 / (s_w)')``; ``q0 = inf`` leaves the upper end open."""
    upper = INF if math.isinf(q0) else q0 / conj(sw)
    return (p0 * rw, upper)


DEFAULT_P_GRID = tuple(1.0 + 0.25 * k for k in range(17))
DEFAULT_Q_GRID = (INF, 16.0, 8.0, 6.0, 4.0, 3.0, 2.5, 2.0, 1.75, 1.5, 1.25)


def estimate_exponents(
    source,
    p0: float = 1.0,
    q0: float = INF,
    *,
    levels: Sequence[int] | None = None,
    dim: int = 1,
    rho: float = 1.1,
    p_grid: Sequence[float] = DEFAULT_P_GRID,
    q_grid: Sequence[float] = DEFAULT_Q_GRID,
    family=CubeFamily.SHIFTED_DYADIC,
    max_spread: float = 0.25,
) -> WeightReport:
    """Estimate ``r_w``, ``s_w`` and the interval ``W_w(p0, q0)``.

    ``source`` is a :class:`WeightFactorySpec`, an analytic :class:`Expr`
    (both resampled at every level), or a :class:`GridFunction` (coarsened
    by averaging to the lower levels).  ``levels`` must hold at least three
    consecutive levels; the default is the four finest levels ending at 13
    in 1D and 6 in 2D (or at the grid function's own level).

    Protocol, per exponent on the grid:

    1. compute the characteristic at every level;
    2. ``beta_k = log2(c_k / c_{k-1})`` for the last two refinements;
    3. the exponent is DIVERGENT if both increments are ``>= log2(rho)``;
    4. divergent exponents give ``r_w = p + beta/dim`` and ``1/s_w = 1/q + beta/dim``.

    ``r_w`` is reported as 1 (CONVERGED) when ``A_1`` does not diverge and
    ``s_w`` as infinite (CONVERGED) when ``RH_inf`` does not diverge; in
    that case ``lower_bound = 1/log2(rho)`` is the detection limit.  The
    status is INCONCLUSIVE when every exponent on the grid diverges or when
    the point estimates disagree by more than ``max_spread``.
    """
    if not (1 <= p0 < q0):
        raise ValueError("need 1 <= p0 < q0")
    if rho <= 1:
        raise ValueError("divergence factor must exceed 1")
    closed = None
    if isinstance(source, GridFunction):
        top = source.grid.level
        levels = list(levels) if levels is not None else list(range(top - 3, top + 1))
        weights = {}
        g = source
        for lvl in sorted(levels, reverse=True):
            if lvl > top:
                raise ValueError("cannot refine a bare grid function")
            if g.grid.level > lvl:
                g = coarsen(g, g.grid.level - lvl)
            weights[lvl] = g
        dim = source.grid.dim
    else:
        if levels is None:
            top = 13 if dim == 1 else 6
            levels = list(range(top - 3, top + 1))
        levels = sorted(levels)
        if isinstance(source, WeightFactorySpec):
            closed = source.closed_form(dim)
            weights = {lvl: build_weight(source, Grid(dim, lvl)).weight for lvl in levels}
        else:
            weights = {lvl: sample(source, Grid(dim, lvl)) for lvl in levels}
    levels = sorted(weights)
    if len(levels) < 3 or any(b - a != 1 for a, b in zip(levels, levels[1:])):
        raise ValueError("need at least three consecutive levels")

    thresh = math.log2(rho)
    ap_curve, rh_curve = [], []
    ap_growth, rh_growth = {}, {}
    for p in p_grid:
        cs = [ap_characteristic(weights[lvl], p, family) for lvl in levels]
        ap_curve.extend((p, lvl, c) for lvl, c in zip(levels, cs))
        ap_growth[p] = _growth(cs)
    for q in q_grid:
        cs = [rh_characteristic(weights[lvl], q, family) for lvl in levels]
        rh_curve.extend((q, lvl, c) for lvl, c in zip(levels, cs))
        rh_growth[q] = _growth(cs)

    # a characteristic growing like N^beta per level shifts the exponent by beta / dim
    scale = {k: v / dim for k, v in ap_growth.items()}
    rw = _estimate_rw(scale, thresh / dim, max_spread)
    scale = {k: v / dim for k, v in rh_growth.items()}
    sw = _estimate_sw(scale, thresh / dim, max_spread)
    lo, hi = ww_interval(rw.value, sw.value, p0, q0)
    tol = p0 * rw.tolerance
    if not math.isinf(q0) and not math.isinf(sw.value):
        # d/d(1/s) of q0 (1 - 1/s) is -q0; propagate the 1/s_w tolerance
        tol += q0 * sw.per_exponent.get("inv_tolerance", 0.0)
    empty = (hi - lo) <= tol if not math.isinf(hi) else False
    return WeightReport(
        ap_curve=ap_curve,
        rh_curve=rh_curve,
        rw_estimate=rw,
        sw_estimate=sw,
        ww_interval=(lo, hi),
        ww_empty=bool(empty),
        ww_tolerance=tol,
        levels_used=levels,
        p0=p0,
        q0=q0,
        family=CubeFamily.parse(family).value,
        rho=rho,
        closed_form=closed,
    )


def _growth(cs):
    lc = np.log2(np.asarray(cs))
    return np.diff(lc)


def _estimate_rw(growth: dict, thresh: float, max_spread: float) -> ExponentEstimate:
    ps = sorted(growth)
    div = [p for p in ps if np.all(growth[p][-2:] >= thresh)]
    conv = [p for p in ps if p not in div]
    per = {f"p={p:g}": p + float(growth[p][-1]) for p in div}
    if not div:
        return ExponentEstimate(1.0, Status.CONVERGED, (1.0, ps[0]), 0.0, per_exponent=per)
    if not conv or max(div) > min(conv):
        # either everything diverges or the transition is not monotone
        return ExponentEstimate(
            max(div) + float(growth[max(div)][-1]),
            Status.INCONCLUSIVE,
            (max(div), INF if not conv else min(conv)),
            INF,
            per_exponent=per,
        )
    ests = [p + float(growth[p][-1]) for p in div]
    drift = [abs(float(growth[p][-1] - growth[p][-2])) for p in div]
    value = ests[0]  # smallest exponent carries the strongest signal
    tol = max(max(ests) - min(ests), max(drift))
    status = Status.DIVERGENCE_DETECTED if tol <= max_spread else Status.INCONCLUSIVE
    per["bracket_midpoint"] = 0.5 * (max(div) + min(conv))
    return ExponentEstimate(value, status, (max(div), min(conv)), tol, per_exponent=per)


def _estimate_sw(growth: dict, thresh: float, max_spread: float) -> ExponentEstimate:
    # order from the strongest class (RH_inf) downwards
    qs = sorted(growth, key=lambda q: -q if not math.isinf(q) else -INF)
    div = [q for q in qs if np.all(growth[q][-2:] >= thresh)]
    conv = [q for q in qs if q not in div]
    inv = {q: (0.0 if math.isinf(q) else 1.0 / q) + float(growth[q][-1]) for q in div}
    per = {f"q={q:g}": (1.0 / v if v > 0 else INF) for q, v in inv.items()}
    if not div:
        limit = 1.0 / thresh
        return ExponentEstimate(
            INF, Status.CONVERGED, (INF, INF), 0.0, lower_bound=limit, per_exponent=per
        )
    if not conv or min(div) < max(conv):
        best = inv[qs[0]] if qs[0] in inv else max(inv.values())
        return ExponentEstimate(
            1.0 / best if best > 0 else INF,
            Status.INCONCLUSIVE,
            (min(div), max(conv) if conv else 1.0),
            INF,
            per_exponent=per,
        )
    vals = [inv[q] for q in div]
    drift = [abs(float(growth[q][-1] - growth[q][-2])) for q in div]
    inv_value = vals[0]
    inv_tol = max(max(vals) - min(vals), max(drift))
    value = 1.0 / inv_value
    # tolerance on s from the tolerance on 1/s
    lo_inv = max(inv_value - inv_tol, 1e-12)
    tol = max(abs(1.0 / lo_inv - value), abs(value - 1.0 / (inv_value + inv_tol)))
    status = Status.DIVERGENCE_DETECTED if inv_tol <= max_spread * inv_value else Status.INCONCLUSIVE
    per["inv_tolerance"] = inv_tol
    if value <= 1.0:
        status = Status.INCONCLUSIVE
    per["bracket_midpoint"] = 0.5 * (min(div) + max(conv)) if not math.isinf(min(div)) else max(conv)
    return ExponentEstimate(value, status, (min(div), max(conv)), tol, per_exponent=per)
