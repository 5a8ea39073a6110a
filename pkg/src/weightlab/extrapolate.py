"""Rubio de Francia iteration and the two majorant constructions.

Given a weight ``u`` the operator ``S_u f = M(f u) / u`` is iterated as

    R_K f = sum_{k=0}^{K} S_u^k f / (2 nu)^k

where ``nu`` is a declared upper bound for the norm of ``S_u`` on the
working space.  The two constructions below turn a non-negative ``h`` into
a majorant ``H >= h`` with controlled norm whose product with ``w`` (or
inverse power times ``w``) lands in the target weight class.  All
exponents are divided by ``p0`` internally, so every formula is the
normalized ``p0 = 1`` version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import CubeFamily, GridFunction, coarsen
from .maximal import maximal
from .weights import INF, ap_characteristic, conj, estimate_exponents, rh_characteristic, Status

__all__ = [
    "phi",
    "s_u",
    "estimate_su_norm",
    "rubio",
    "rubio_orbit",
    "HCertificate",
    "WeightClassRefused",
    "build_H_case_a",
    "build_H_case_b",
    "a1_partial_sum_check",
    "exponent_bookkeeping",
    "extrapolation_transfer",
    "weak_pair_family",
]


class WeightClassRefused(ValueError):
    """The weight could not be certified in the class the construction needs."""


def phi(q: float, q0: float) -> float:
    """``(q0/q)'(q - 1) + 1``."""
    if not (1 < q < q0):
        raise ValueError(f"phi needs 1 < q < q0, got q={q}, q0={q0}")
    return conj(q0 / q if not math.isinf(q0) else INF) * (q - 1.0) + 1.0


def _lr(v, r, w):
    return float((np.abs(v) ** r * w).sum()) ** (1.0 / r)


def s_u(f: GridFunction, u: GridFunction, family=CubeFamily.ALL) -> GridFunction:
    """``M(f u) / u`` with Lebesgue ``M`` over ``family``."""
    if np.any(u.values <= 0):
        raise ValueError("u must be strictly positive")
    return f.like(maximal(f * u, family).values / u.values)


def _trial_functions(grid, u, n_trials, seed):
    shape = grid.shape
    trials = [np.ones(shape), 1.0 / u]
    flat = u.ravel()
    for pos in (int(np.argmin(flat)), int(np.argmax(flat)), 0, flat.size - 1, flat.size // 2):
        e = np.zeros(flat.size)
        e[pos] = 1.0
        trials.append(e.reshape(shape))
    rng = np.random.default_rng(seed)
    while len(trials) < n_trials:
        kind = len(trials) % 3
        if kind == 0:
            trials.append(rng.random(shape))
        elif kind == 1:
            trials.append(rng.random(shape) ** 8)  # spiky
        else:
            e = np.zeros(flat.size)
            e[rng.integers(flat.size)] = 1.0
            trials.append(e.reshape(shape))
    return trials[: max(n_trials, 1)]


def estimate_su_norm(
    u: GridFunction,
    r: float,
    w: GridFunction | None = None,
    trials: int = 16,
    *,
    seed: int = 0,
    safety: float = 2.0,
    family=CubeFamily.ALL,
) -> float:
    """``safety * max_f ||S_u f||_{L^r(w)} / ||f||_{L^r(w)}`` over trial functions.

    The trial list is a fixed prefix (constants, ``1/u``, spikes at extreme
    cells) followed by a seeded stream, so more trials never lower the
    estimate.
    """
    if not r > 1:
        raise ValueError("need r > 1")
    wv = np.ones(u.grid.shape) if w is None else w.values
    best = 0.0
    for t in _trial_functions(u.grid, u.values, trials, seed):
        f = u.like(t)
        num = _lr(s_u(f, u, family).values, r, wv)
        den = _lr(t, r, wv)
        if den > 0:
            best = max(best, num / den)
    return safety * best


def rubio_orbit(f: GridFunction, u: GridFunction, K: int, family=CubeFamily.ALL) -> list:
    """``[f, S_u f, ..., S_u^K f]``."""
    out = [f]
    for _ in range(K):
        out.append(s_u(out[-1], u, family))
    return out


def rubio(f: GridFunction, u: GridFunction, nu: float, K: int, family=CubeFamily.ALL) -> GridFunction:
    """Truncated Rubio de Francia sum ``sum_{k<=K} S_u^k f / (2 nu)^k``."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if np.any(f.values < 0):
        raise ValueError("f must be non-negative")
    if not nu > 0:
        raise ValueError("nu must be positive")
    return _sum_orbit(rubio_orbit(f, u, K, family), nu)


def _sum_orbit(orbit, nu):
    acc = np.zeros(orbit[0].grid.shape)
    for k, t in enumerate(orbit):
        acc += t.values / (2.0 * nu) ** k
    return orbit[0].like(acc)


def a1_partial_sum_check(
    f: GridFunction, u: GridFunction, nu: float, K: int, family=CubeFamily.ALL, rtol: float = 1e-10
) -> dict:
    """``M(u R_K f) <= 2 nu u R_{K+1} f`` cellwise, plus the measured ``A_1`` constant."""
    orbit = rubio_orbit(f, u, K + 1, family)
    rk = _sum_orbit(orbit[: K + 1], nu)
    rk1 = _sum_orbit(orbit, nu)
    lhs = maximal(rk * u, family).values
    rhs = 2.0 * nu * u.values * rk1.values
    excess = float(np.max(lhs - rhs * (1 + rtol)))
    ok = excess <= 0.0
    weight = rk * u
    a1 = ap_characteristic(weight, 1.0, family) if np.all(weight.values > 0) else INF
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(rk.values > 0, rk1.values / rk.values, 1.0)
    return {
        "passed": bool(ok),
        "max_excess": excess,
        "a1_characteristic": a1,
        "a1_bound": 2.0 * nu * float(tail.max()),
        "K": K,
        "nu": nu,
    }


def _orbit_growth(orbit, nu, r, w):
    norms = [_lr(t.values, r, w) for t in orbit]
    ratios = [norms[k + 1] / (nu * norms[k]) for k in range(len(norms) - 1) if norms[k] > 0]
    return norms, (max(ratios) if ratios else 0.0)


@dataclass
class HCertificate:
    case: str
    pointwise_domination: bool
    norm_ratio: float
    norm_bound: float
    tail_slack: float
    truncation_term: float
    norm_bound_check: bool
    nu: float
    weight_class: dict = field(default_factory=dict)
    weight_class_ok: bool = True
    precondition: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.pointwise_domination and self.norm_bound_check and self.weight_class_ok

    def to_dict(self) -> dict:
        def num(x):
            if isinstance(x, (bool, np.bool_)):
                return bool(x)
            if isinstance(x, (int, float, np.floating)):
                x = float(x)
                return "inf" if math.isinf(x) else x
            if isinstance(x, dict):
                return {k: num(v) for k, v in sorted(x.items())}
            if isinstance(x, (list, tuple)):
                return [num(v) for v in x]
            return x

        return num(
            {
                "case": self.case,
                "pointwise_domination": self.pointwise_domination,
                "norm_ratio": self.norm_ratio,
                "norm_bound": self.norm_bound,
                "tail_slack": self.tail_slack,
                "truncation_term": self.truncation_term,
                "norm_bound_check": self.norm_bound_check,
                "nu": self.nu,
                "weight_class": self.weight_class,
                "weight_class_ok": self.weight_class_ok,
                "precondition": self.precondition,
                "passed": self.passed,
            }
        )


def _certify_weight(w: GridFunction, q: float, p0: float, q0: float, assume: bool) -> dict:
    """Check ``q`` lies inside the estimated interval ``W_w(p0, q0)``."""
    if assume:
        return {"certified": True, "how": "assumed by caller"}
    rep = estimate_exponents(w, p0, q0)
    lo, hi = rep.ww_interval
    tol = rep.ww_tolerance
    inside = (lo + tol < q) and (q < hi - tol or math.isinf(hi))
    ok = inside and not rep.inconclusive
    return {
        "certified": bool(ok),
        "how": "exponent estimator",
        "rw": rep.rw_estimate.value,
        "sw": rep.sw_estimate.value,
        "interval": list(rep.ww_interval),
        "tolerance": tol,
        "statuses": [rep.rw_estimate.status.value, rep.sw_estimate.status.value],
    }


def _levels(h: GridFunction, w: GridFunction, n_levels: int):
    """``[(h, w)]`` at the ``n_levels`` finest levels, coarsest first."""
    out = [(h, w)]
    for _ in range(n_levels - 1):
        hh, ww = out[0]
        out.insert(0, (coarsen(hh), coarsen(ww)))
    return out


def _class_stability(products, p_cls, rh_exp, family, rho, drift_limit):
    """Characteristics of the product weights across levels."""
    ap = [ap_characteristic(x, p_cls, family) for x in products]
    rh = [rh_characteristic(x, rh_exp, family) for x in products] if rh_exp is not None else None
    thresh = math.log2(rho)

    def verdict(cs):
        g = np.diff(np.log2(cs))
        diverging = bool(len(g) >= 2 and np.all(g[-2:] >= thresh))
        drift = abs(cs[-1] / cs[-2] - 1.0)
        return {"values": cs, "drift": drift, "diverging": diverging, "ok": (not diverging) and drift <= drift_limit}

    out = {"A_p": verdict(ap), "p": p_cls}
    if rh is not None:
        out["RH"] = verdict(rh)
        out["rh_exponent"] = rh_exp
    ok = out["A_p"]["ok"] and (rh is None or out["RH"]["ok"])
    return out, ok


def _build(
    case: str,
    h: GridFunction,
    w: GridFunction,
    p: float,
    q: float,
    q0: float,
    p0: float,
    K: int,
    *,
    nu: float | None,
    trials: int,
    seed: int,
    family,
    n_levels: int,
    rho: float,
    drift_limit: float,
    assume_weight_class: bool,
):
    if np.any(h.values < 0):
        raise ValueError("h must be non-negative")
    if h.grid != w.grid:
        raise ValueError("h and w live on different grids")
    if not (p0 < q < q0):
        raise ValueError("need p0 < q < q0")
    if case == "a" and not (p0 <= p < q):
        raise ValueError("case (a) needs p0 <= p < q")
    if case == "b" and not (q < p <= q0):
        raise ValueError("case (b) needs q < p <= q0")
    pre = _certify_weight(w, q, p0, q0, assume_weight_class)
    if not pre["certified"]:
        raise WeightClassRefused(f"weight not certified in A_q ∩ RH_(q0/q)' for q={q}: {pre}")
    # normalized exponents
    P, Qn, Q0 = p / p0, q / p0, q0 / p0
    ph = phi(Qn, Q0)
    if case == "a":
        rp = conj(Qn / P)
        r = conj(ph)  # working space L^{phi'}(w)
        u_exp = conj(Qn) / r
        in_exp = rp / r
        out_exp = r / rp
        norm_exp = r / rp
        h_space = rp
    else:
        s0 = conj(Q0 / Qn) if not math.isinf(Q0) else 1.0
        r = ph  # working space L^{phi}(w)
        u_exp = (1.0 - s0) / ph
        in_exp = Qn / ph
        out_exp = ph / Qn
        norm_exp = ph / Qn
        h_space = Qn
    per_level = []
    for hh, ww in _levels(h, w, n_levels):
        u = ww.like(ww.values**u_exp)
        f = hh.like(hh.values**in_exp)
        nu_l = nu if nu is not None else estimate_su_norm(u, r, ww, trials, seed=seed, family=family)
        orbit = rubio_orbit(f, u, K + 1, family)
        R = _sum_orbit(orbit[: K + 1], nu_l)
        H = hh.like(R.values**out_exp)
        per_level.append((hh, ww, u, f, nu_l, orbit, H))
    hh, ww, u, f, nu_l, orbit, H = per_level[-1]
    wv = ww.values
    dom = bool(np.all(hh.values <= H.values * (1 + 1e-12) + 1e-300))
    nh = _lr(hh.values, h_space, wv)
    nH = _lr(H.values, h_space, wv)
    ratio = nH / nh if nh > 0 else 0.0
    norms, eta = _orbit_growth(orbit, nu_l, r, wv)
    geo = sum((eta / 2.0) ** k for k in range(K + 1))
    slack = max(0.0, geo / 2.0 - 1.0)
    bound = 2.0**norm_exp * (1.0 + slack) ** norm_exp
    trunc = norms[K + 1] / ((2.0 * nu_l) ** (K + 1) * norms[0]) if norms[0] > 0 else 0.0
    # class of the product weight
    if case == "a":
        products = [x[1].like(x[6].values * x[1].values) for x in per_level]
        label = "H w"
    else:
        products = [x[1].like(x[6].values ** (-(P - Qn)) * x[1].values) for x in per_level]
        label = "H^-(p-q) w"
    rh_exp = None if (math.isinf(Q0) or P == Q0) else conj(Q0 / P)
    if case == "b" and P == Q0:
        rh_exp = INF
    if nh == 0:
        wc, wc_ok = {"skipped": "h vanishes"}, True
    elif any(np.any(x.values <= 0) for x in products):
        wc, wc_ok = {"skipped": "product weight not strictly positive"}, False
    else:
        wc, wc_ok = _class_stability(products, P, rh_exp, family, rho, drift_limit)
        wc["product"] = label
    cert = HCertificate(
        case=case,
        pointwise_domination=dom,
        norm_ratio=ratio,
        norm_bound=bound,
        tail_slack=slack,
        truncation_term=trunc,
        norm_bound_check=bool(ratio <= bound * (1 + 1e-12)),
        nu=nu_l,
        weight_class=wc,
        weight_class_ok=wc_ok,
        precondition=pre,
    )
    return H, cert


def build_H_case_a(h, w, p, q, q0, p0=1.0, K=12, *, nu=None, trials=16, seed=0,
                   family=CubeFamily.ALL, n_levels=3, rho=1.1, drift_limit=0.25,
                   assume_weight_class=False):
    """Majorant for ``p0 <= p < q``: ``H = R(h^{(q/p)'/phi'})^{phi'/(q/p)'}``.

    ``u = w^{q'/phi'}`` and ``R`` runs on ``L^{phi'}(w)``.  Certifies
    ``h <= H``, ``||H||_{L^{(q/p)'}(w)} <= 2^{phi'/(q/p)'} ||h||`` up to the
    reported slack, and level stability of the ``A_p ∩ RH_{(q0/p)'}``
    characteristics of ``H w`` over the ``n_levels`` finest levels.
    """
    return _build("a", h, w, p, q, q0, p0, K, nu=nu, trials=trials, seed=seed, family=family,
                  n_levels=n_levels, rho=rho, drift_limit=drift_limit,
                  assume_weight_class=assume_weight_class)


def build_H_case_b(h, w, p, q, q0, K=12, *, p0=1.0, nu=None, trials=16, seed=0,
                   family=CubeFamily.ALL, n_levels=3, rho=1.1, drift_limit=0.25,
                   assume_weight_class=False):
    """Majorant for ``q < p <= q0``: ``H = R(h^{q/phi})^{phi/q}``.

    ``u = w^{(1-(q0/q)')/phi}`` and ``R`` runs on ``L^{phi}(w)``.  The
    product weight checked is ``H^{-(p-q)} w``; at ``p = q0`` the reverse
    Hölder exponent is infinite.
    """
    return _build("b", h, w, p, q, q0, p0, K, nu=nu, trials=trials, seed=seed, family=family,
                  n_levels=n_levels, rho=rho, drift_limit=drift_limit,
                  assume_weight_class=assume_weight_class)


def exponent_bookkeeping(p: float, q: float, q0: float) -> dict:
    """Auxiliary exponent ``s`` of the two-factor splitting in case (a), and its mirror.

    Case (a) (``1 < p < q < q0``): ``s = (q-1)(q0-p) / ((q0-1)(q-p)) > 1``.
    Case (b) (``q < p < q0``): the roles of ``p`` and ``q`` swap.
    Also returns the phi consistency residual ``(q0/q)'(1 - phi(q)') - (1 - q')``.
    """
    out = {}
    if 1 < p < q < q0:
        out["case"] = "a"
        out["s"] = (q - 1.0) * (q0 - p) / ((q0 - 1.0) * (q - p)) if not math.isinf(q0) else (q - 1.0) / (q - p)
    elif 1 < q < p < q0:
        out["case"] = "b"
        out["s"] = (p - 1.0) * (q0 - q) / ((q0 - 1.0) * (p - q)) if not math.isinf(q0) else (p - 1.0) / (p - q)
    else:
        raise ValueError("need 1 < p, q < q0 with p != q")
    ph = phi(q, q0)
    lhs = conj(q0 / q if not math.isinf(q0) else INF) * (1.0 - conj(ph))
    out["phi"] = ph
    out["phi_residual"] = abs(lhs - (1.0 - conj(q)))
    return out


def extrapolation_transfer(
    f: GridFunction,
    w: GridFunction,
    p: float = 2.0,
    q: float = 3.0,
    p0: float = 1.0,
    q0: float = 4.0,
    K: int = 12,
    *,
    family=CubeFamily.ALL,
    assume_weight_class: bool = False,
    **kw,
) -> dict:
    """Transfer of ``||Mf||_{L^p} <= C ||4 M^2 f||_{L^p}`` from ``p`` to ``q``.

    The pair ``(F, G) = (Mf, 4 M^2 f)``.  For ``q > p`` the extremal dual
    function ``h = F^{q-p}`` (normalized in ``L^{(q/p)'}(w)``) feeds case
    (a); for ``q < p`` the pairing ``h = F/||F|| + G/||G||`` feeds case (b).
    The base constant ``C_p`` is measured on the constructed weight and the
    chain bound of the extrapolation argument is compared with the direct
    ratio ``||F||_{L^q(w)} / ||G||_{L^q(w)}``.
    """
    F = maximal(f, family)
    G = F.like(4.0 * maximal(F, family).values)
    wv = w.values
    direct = _lr(F.values, q, wv) / _lr(G.values, q, wv)
    if q > p:
        rp = conj(q / p)
        h = F.like(F.values ** (q - p))
        h = h.like(h.values / _lr(h.values, rp, wv))
        H, cert = build_H_case_a(h, w, p, q, q0, p0, K, family=family,
                                 assume_weight_class=assume_weight_class, **kw)
        W = H.values * wv
        Cp = (float((F.values**p * W).sum()) / float((G.values**p * W).sum())) ** (1.0 / p)
        chain = Cp * _lr(H.values, rp, wv) ** (1.0 / p)
    else:
        h = F.like(F.values / _lr(F.values, q, wv) + G.values / _lr(G.values, q, wv))
        H, cert = build_H_case_b(h, w, p, q, q0, K, p0=p0, family=family,
                                 assume_weight_class=assume_weight_class, **kw)
        W = H.values ** (-(p - q)) * wv
        Cp = (float((F.values**p * W).sum()) / float((G.values**p * W).sum())) ** (1.0 / p)
        chain = Cp * _lr(H.values, q, wv)
    return {
        "direct_ratio": direct,
        "base_constant": Cp,
        "chain_bound": chain,
        "passed": bool(direct <= chain * (1 + 1e-12) and math.isfinite(chain)),
        "certificate": cert.to_dict(),
    }


def weak_pair_family(f: GridFunction, g: GridFunction, lambdas: Sequence[float]) -> list:
    """Truncated pairs ``(lam chi_{f > lam}, g)`` for weak-type extrapolation."""
    return [(f.like(lam * (np.abs(f.values) > lam)), g) for lam in lambdas]
