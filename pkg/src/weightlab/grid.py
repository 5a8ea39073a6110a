"""Dyadic discretization of the unit cube.

Everything else in the package computes on the objects defined here:

* :class:`Grid` -- ``2**level`` cells per axis on ``[0, 1)^dim``.
* :class:`GridFunction` -- a piecewise-constant function, one value per cell.
* :class:`Cube` -- a grid-aligned cube given by an integer anchor and side.
* :class:`Measure` -- Lebesgue measure or ``w dx`` for a positive weight.
* :class:`CubeFamily` -- which cubes a supremum "over all cubes" ranges over.

Cube dilations are clipped to the domain (finite-measure convention).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy import integrate

__all__ = [
    "Grid",
    "GridFunction",
    "Cube",
    "CubeFamily",
    "Measure",
    "Expr",
    "cube_average",
    "enumerate_family",
    "family_sides",
    "family_anchors",
    "sample",
    "sample_callable",
    "refine",
    "coarsen",
    "csv_text",
    "read_csv",
    "write_csv",
]


class CubeFamily(str, enum.Enum):
    """Cube families used to discretize suprema over cubes."""

    ALL = "all"
    DYADIC = "dyadic"
    SHIFTED_DYADIC = "shifted"

    @classmethod
    def parse(cls, value: Union[str, "CubeFamily"]) -> "CubeFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"shifted_dyadic": "shifted", "shifted-dyadic": "shifted"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class Grid:
    """Uniform dyadic grid on ``[0, 1)^dim`` with ``2**level`` cells per axis."""

    dim: int
    level: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.level) != self.level or self.level < 1:
            raise ValueError(f"level must be an integer >= 1, got {self.level}")

    @property
    def n(self) -> int:
        """Cells per axis."""
        return 1 << self.level

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def h(self) -> float:
        """Cell width."""
        return 1.0 / self.n

    @property
    def cell_measure(self) -> float:
        return self.h**self.dim

    def edges(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def finer(self, by: int = 1) -> "Grid":
        return Grid(self.dim, self.level + by)

    def coarser(self, by: int = 1) -> "Grid":
        return Grid(self.dim, self.level - by)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function on a :class:`Grid`.

    ``values`` is stored read-only with shape ``grid.shape`` (row-major in 2D).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.size != self.grid.size:
            raise ValueError(
                f"expected {self.grid.size} values for {self.grid}, got {arr.size}"
            )
        arr = arr.reshape(self.grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def like(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    # small arithmetic surface; everything else works on ``.values``
    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.like(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.values - self._other(other))

    def __rsub__(self, other):
        return self.like(self._other(other) - self.values)

    def __mul__(self, other):
        return self.like(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.like(self.values / self._other(other))

    def __neg__(self):
        return self.like(-self.values)

    def __abs__(self):
        return self.like(np.abs(self.values))

    def __pow__(self, exponent):
        return self.like(self.values**exponent)

    def integral(self, measure: "Measure | None" = None) -> float:
        if measure is None:
            return float(self.values.sum() * self.grid.cell_measure)
        return float((self.values * measure.density).sum() * self.grid.cell_measure)

    def lp_norm(self, p: float, measure: "Measure | None" = None) -> float:
        a = np.abs(self.values)
        dens = 1.0 if measure is None else measure.density
        top = float(a.max()) if a.size else 0.0
        if math.isinf(p) or top == 0.0:
            return top
        # scale by the max so tiny or huge values neither underflow nor overflow
        return top * float((((a / top) ** p) * dens).sum() * self.grid.cell_measure) ** (1.0 / p)

    def allclose(self, other: "GridFunction", atol: float = 1e-12) -> bool:
        return other.grid == self.grid and np.allclose(
            self.values, other.values, rtol=0.0, atol=atol
        )


@dataclass(frozen=True)
class Cube:
    """Grid-aligned cube: integer ``anchor`` (lowest cell per axis) and ``side``."""

    anchor: tuple
    side: int

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        if self.side < 1:
            raise ValueError("cube side must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.anchor)

    def validate(self, grid: Grid) -> None:
        if self.dim != grid.dim:
            raise ValueError(f"cube dimension {self.dim} != grid dimension {grid.dim}")
        for a in self.anchor:
            if a < 0 or a + self.side > grid.n:
                raise ValueError(f"cube {self} lies outside the domain of {grid}")

    def slices(self) -> tuple:
        return tuple(slice(a, a + self.side) for a in self.anchor)

    def contains_cell(self, cell: Sequence[int]) -> bool:
        return all(a <= c < a + self.side for a, c in zip(self.anchor, cell))

    def sidelength(self, grid: Grid) -> float:
        """Physical sidelength ``side * 2**-level`` (the radius convention r(Q))."""
        return self.side * grid.h

    def dilate_box(self, factor: float, grid: Grid) -> tuple:
        """Clipped cell box of the co-centred dilate ``factor * Q``.

        The collar is ``floor((factor - 1) * side / 2)`` whole cells on each
        side, so a one-cell cube is its own double.  Returns per-axis
        ``(lo, hi)`` half-open index pairs.
        """
        collar = int(math.floor((factor - 1.0) * self.side / 2.0 + 1e-12))
        return tuple(
            (max(0, a - collar), min(grid.n, a + self.side + collar))
            for a in self.anchor
        )

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor), "side": self.side}


def box_slices(box) -> tuple:
    return tuple(slice(lo, hi) for lo, hi in box)


@dataclass(frozen=True, eq=False)
class Measure:
    """Lebesgue measure (``weight is None``) or ``w dx`` on a grid."""

    grid: Grid
    weight: "GridFunction | None" = None

    def __post_init__(self):
        if self.weight is not None:
            if self.weight.grid != self.grid:
                raise ValueError("weight lives on a different grid")
            if not np.all(self.weight.values > 0):
                raise ValueError("a weighted measure needs strictly positive weight")

    @classmethod
    def lebesgue(cls, grid: Grid) -> "Measure":
        return cls(grid)

    @classmethod
    def weighted(cls, w: GridFunction) -> "Measure":
        return cls(w.grid, w)

    @property
    def is_lebesgue(self) -> bool:
        return self.weight is None

    @cached_property
    def density(self) -> np.ndarray:
        if self.weight is None:
            return np.ones(self.grid.shape)
        return self.weight.values

    def mass(self, cube: Cube) -> float:
        cube.validate(self.grid)
        return float(self.density[cube.slices()].sum() * self.grid.cell_measure)

    def box_mass(self, box) -> float:
        return float(self.density[box_slices(box)].sum() * self.grid.cell_measure)

    def total(self) -> float:
        return float(self.density.sum() * self.grid.cell_measure)

    @cached_property
    def doubling_order(self) -> float:
        """``log2`` of the largest dyadic parent/child mass ratio.

        For Lebesgue measure this is exactly ``dim``.  It is the exponent D
        for which ``mu(parent) <= 2**D mu(child)`` over all dyadic cubes.
        """
        if self.weight is None:
            return float(self.grid.dim)
        worst = 1.0
        d = self.density
        while d.shape[0] > 1:
            parent = _block_sum(d, 2)
            children = d
            ratio = np.repeat(parent, 2, axis=0)
            if d.ndim == 2:
                ratio = np.repeat(ratio, 2, axis=1)
            worst = max(worst, float((ratio / children).max()))
            d = parent
        return math.log2(worst)


def _block_sum(a: np.ndarray, k: int) -> np.ndarray:
    n = a.shape[0] // k
    if a.ndim == 1:
        return a.reshape(n, k).sum(axis=1)
    return a.reshape(n, k, n, k).sum(axis=(1, 3))


# ---------------------------------------------------------------------------
# cube families
# ---------------------------------------------------------------------------


def family_sides(grid: Grid, family: CubeFamily) -> list:
    family = CubeFamily.parse(family)
    if family is CubeFamily.ALL:
        return list(range(1, grid.n + 1))
    return [1 << k for k in range(grid.level + 1)]


def family_anchors(grid: Grid, family: CubeFamily, side: int) -> np.ndarray:
    """Anchor positions (per axis) of the family's cubes of a given side.

    In 2D the anchors are the Cartesian product of this set with itself.
    The shifted copies are the dyadic lattice translated by ``round(n/3)``
    cells, reduced modulo the side.
    """
    family = CubeFamily.parse(family)
    n = grid.n
    if family is CubeFamily.ALL:
        return np.arange(n - side + 1)
    dyadic = np.arange(0, n - side + 1, side)
    if family is CubeFamily.DYADIC:
        return dyadic
    shift = int(round(n / 3.0)) % side
    if shift == 0:
        return dyadic
    shifted = np.arange(shift, n - side + 1, side)
    return np.union1d(dyadic, shifted)


def enumerate_family(grid: Grid, family: CubeFamily) -> list:
    """All cubes of a family, without duplicates."""
    cubes = []
    for s in family_sides(grid, family):
        idx = family_anchors(grid, family, s)
        if grid.dim == 1:
            cubes.extend(Cube((int(a),), s) for a in idx)
        else:
            cubes.extend(Cube((int(a), int(b)), s) for a in idx for b in idx)
    return cubes


def cube_average(f: GridFunction, cube: Cube, measure: "Measure | None" = None) -> float:
    """Average of ``f`` over ``cube`` with respect to ``measure`` (exact)."""
    cube.validate(f.grid)
    if measure is None:
        return float(f.values[cube.slices()].mean())
    if measure.grid != f.grid:
        raise ValueError("measure and function live on different grids")
    w = measure.density[cube.slices()]
    return float((f.values[cube.slices()] * w).sum() / w.sum())


# ---------------------------------------------------------------------------
# sampling analytic families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    """Named analytic family with parameters, e.g. ``Expr("power", alpha=0.5)``."""

    family: str
    params: Mapping = field(default_factory=dict)

    def __init__(self, family: str, params: Mapping | None = None, **kw):
        merged = dict(params or {})
        merged.update(kw)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", merged)

    def __hash__(self):
        return hash((self.family, repr(sorted(self.params.items()))))

    @classmethod
    def from_dict(cls, d: Mapping) -> "Expr":
        d = dict(d)
        family = d.pop("family")
        return cls(family, d)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for k, v in self.params.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


_QUADRATURES = ("cell_average", "midpoint")


def sample(expr, grid: Grid, quadrature: str = "cell_average") -> GridFunction:
    """Sample an analytic family on ``grid``.

    ``expr`` is an :class:`Expr`, a mapping with a ``family`` key, or a
    callable ``f(x)`` (``x`` of shape ``(dim, ...)``).  Builtin families:

    ``constant`` (c), ``power`` (alpha, center), ``log`` (center),
    ``indicator`` (lo, hi), ``ramp`` (a, b, slope), ``sin`` (k),
    ``bump`` (center, width), ``dirac`` (point, mass).

    ``cell_average`` uses closed-form antiderivatives where available and
    Gauss-Legendre quadrature otherwise; ``midpoint`` evaluates at cell
    centres, except that cells touching a singularity are always averaged.
    """
    quadrature = quadrature.lower()
    if quadrature not in _QUADRATURES:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    if callable(expr) and not isinstance(expr, (Expr, Mapping)):
        return sample_callable(expr, grid, quadrature)
    if isinstance(expr, Mapping):
        expr = Expr.from_dict(expr)
    fam = expr.family.lower()
    p = dict(expr.params)
    try:
        builder = _BUILDERS[fam]
    except KeyError:
        raise ValueError(f"unknown analytic family {expr.family!r}") from None
    return GridFunction(grid, builder(grid, quadrature, **p))


def _as_point(value, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dim)
    if arr.size != dim:
        raise ValueError(f"expected a {dim}-dimensional point, got {value!r}")
    return arr


def _constant(grid, quadrature, c=1.0):
    return np.full(grid.shape, float(c))


def _cell_avg_1d(F, grid):
    e = grid.edges()
    Fe = F(e)
    return (Fe[1:] - Fe[:-1]) / grid.h


def _power(grid, quadrature, alpha=1.0, center=0.0):
    alpha = float(alpha)
    c = _as_point(center, grid.dim)
    if alpha <= -grid.dim:
        raise ValueError(
            f"power exponent alpha={alpha} is not locally integrable in dimension {grid.dim}"
        )
    if grid.dim == 1:
        c0 = c[0]

        def F(x):
            d = x - c0
            return np.sign(d) * np.abs(d) ** (alpha + 1.0) / (alpha + 1.0)

        avg = _cell_avg_1d(F, grid)
        if quadrature == "midpoint":
            mid = np.abs(grid.centers() - c0) ** alpha
            sing = _singular_cells_1d(grid, c0) if alpha < 0 else np.zeros(grid.n, bool)
            return np.where(sing, avg, mid)
        return avg
    radial = _RadialFamily(lambda r: r**alpha, lambda R: R ** (alpha + 2.0) / (alpha + 2.0), alpha < 0)
    return radial.sample(grid, c, quadrature)


def _log(grid, quadrature, center=0.0):
    c = _as_point(center, grid.dim)
    if grid.dim == 1:
        c0 = c[0]

        def F(x):
            d = x - c0
            with np.errstate(divide="ignore", invalid="ignore"):
                out = d * (np.log(np.abs(d)) - 1.0)
            return np.where(d == 0, 0.0, out)

        avg = _cell_avg_1d(F, grid)
        if quadrature == "midpoint":
            mid = np.log(np.abs(grid.centers() - c0))
            return np.where(_singular_cells_1d(grid, c0), avg, mid)
        return avg

    def G(R):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = R * R * (2.0 * np.log(R) - 1.0) / 4.0
        return np.where(R == 0, 0.0, out)

    radial = _RadialFamily(np.log, G, True)
    return radial.sample(grid, c, quadrature)


def _singular_cells_1d(grid, c0):
    e = grid.edges()
    return (e[:-1] <= c0) & (c0 <= e[1:])


def _indicator(grid, quadrature, lo=0.0, hi=0.5, value=1.0):
    lo = _as_point(lo, grid.dim)
    hi = _as_point(hi, grid.dim)
    e = grid.edges()
    fracs = []
    for k in range(grid.dim):
        if quadrature == "midpoint":
            m = grid.centers()
            fracs.append(((m >= lo[k]) & (m < hi[k])).astype(float))
        else:
            overlap = np.clip(np.minimum(e[1:], hi[k]) - np.maximum(e[:-1], lo[k]), 0.0, None)
            fracs.append(overlap / grid.h)
    out = fracs[0]
    if grid.dim == 2:
        out = np.multiply.outer(fracs[0], fracs[1])
    return float(value) * out


def _ramp(grid, quadrature, a=0.0, b=1.0, slope=1.0):
    """``slope * clip(x1 - a, 0, b - a)``; varies along the first axis only."""
    a, b, slope = float(a), float(b), float(slope)
    length = b - a

    def F(x):
        y = np.clip(x - a, 0.0, None)
        inside = np.minimum(y, length)
        return slope * (inside**2 / 2.0 + length * np.clip(y - length, 0.0, None))

    if quadrature == "midpoint":
        prof = slope * np.clip(grid.centers() - a, 0.0, length)
    else:
        prof = _cell_avg_1d(F, grid)
    return _broadcast_first_axis(prof, grid)


def _sin(grid, quadrature, k=1.0, amplitude=1.0):
    k = float(k)
    w = 2.0 * np.pi * k
    if quadrature == "midpoint":
        prof = np.sin(w * grid.centers())
    else:
        prof = _cell_avg_1d(lambda x: -np.cos(w * x) / w, grid)
    return float(amplitude) * _broadcast_first_axis(prof, grid)


def _bump(grid, quadrature, center=0.5, width=0.25, amplitude=1.0):
    c = _as_point(center, grid.dim)
    width = float(width)

    def fn(x):
        r2 = sum(((x[k] - c[k]) / width) ** 2 for k in range(grid.dim))
        with np.errstate(divide="ignore", over="ignore"):
            val = np.where(r2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        return float(amplitude) * val * math.e

    return sample_callable(fn, grid, quadrature).values


def _dirac(grid, quadrature, point=0.0, mass=1.0):
    """Point mass resolved at the grid scale: ``mass / |cell|`` on one cell."""
    pt = _as_point(point, grid.dim)
    idx = tuple(int(min(grid.n - 1, max(0, math.floor(x * grid.n)))) for x in pt)
    out = np.zeros(grid.shape)
    out[idx] = float(mass) / grid.cell_measure
    return out


def _broadcast_first_axis(prof, grid):
    if grid.dim == 1:
        return prof
    return np.repeat(prof[:, None], grid.n, axis=1)


_BUILDERS = {
    "constant": _constant,
    "power": _power,
    "log": _log,
    "indicator": _indicator,
    "ramp": _ramp,
    "sin": _sin,
    "bump": _bump,
    "dirac": _dirac,
}


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def sample_callable(fn: Callable, grid: Grid, quadrature: str = "cell_average") -> GridFunction:
    """Sample ``fn`` (vectorized, ``x`` of shape ``(dim, ...)``) on ``grid``."""
    if quadrature == "midpoint":
        m = grid.centers()
        if grid.dim == 1:
            return GridFunction(grid, fn(m[None, :]))
        X, Y = np.meshgrid(m, m, indexing="ij")
        return GridFunction(grid, fn(np.stack([X, Y])))
    t = (_GL_NODES + 1.0) / 2.0
    wts = _GL_WEIGHTS / 2.0
    lo = grid.edges()[:-1]
    pts = lo[:, None] + grid.h * t[None, :]  # (n, q)
    if grid.dim == 1:
        vals = fn(pts[None, :, :])
        return GridFunction(grid, vals @ wts)
    X = pts[:, None, :, None]
    Y = pts[None, :, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    vals = fn(np.stack([X, Y]))
    return GridFunction(grid, np.einsum("ijab,a,b->ij", vals, wts, wts))


class _RadialFamily:
    """Cell averages of a radial function ``g(|x - c|)`` in 2D.

    ``G(R) = int_0^R g(r) r dr`` in closed form.  Cells whose closure holds
    the centre are split into rectangles with the centre at a corner and
    integrated in polar coordinates; cells near the centre are subdivided
    before Gauss-Legendre quadrature.
    """

    def __init__(self, g, G, singular):
        self.g = g
        self.G = G
        self.singular = singular

    def _corner_rect(self, a, b):
        if a <= 0 or b <= 0:
            return 0.0
        th = math.atan2(b, a)
        G = lambda R: float(self.G(np.asarray(R)))
        i1, _ = integrate.quad(lambda t: G(a / math.cos(t)), 0.0, th, limit=200)
        i2, _ = integrate.quad(lambda t: G(b / math.sin(t)), th, math.pi / 2, limit=200)
        return i1 + i2

    def _gauss(self, x0, x1, y0, y1, sub):
        t = (_GL_NODES + 1.0) / 2.0
        w = _GL_WEIGHTS / 2.0
        total = 0.0
        hx = (x1 - x0) / sub
        hy = (y1 - y0) / sub
        for i in range(sub):
            xs = x0 + hx * (i + t)
            for j in range(sub):
                ys = y0 + hy * (j + t)
                r = np.hypot(xs[:, None] - self.c[0], ys[None, :] - self.c[1])
                total += hx * hy * float(w @ self.g(r) @ w)
        return total

    def sample(self, grid, c, quadrature):
        self.c = c
        n, h = grid.n, grid.h
        e = grid.edges()
        m = grid.centers()
        X, Y = np.meshgrid(m, m, indexing="ij")
        r = np.hypot(X - c[0], Y - c[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = self.g(r)
        # bulk: 8x8 Gauss on every cell, vectorized
        t = (_GL_NODES + 1.0) / 2.0
        w = _GL_WEIGHTS / 2.0
        pts = e[:-1, None] + h * t[None, :]
        RX = pts[:, None, :, None] - c[0]
        RY = pts[None, :, None, :] - c[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = self.g(np.hypot(RX, RY))
        avg = np.einsum("ijab,a,b->ij", vals, w, w)
        ci = int(min(n - 1, max(0, math.floor(c[0] * n))))
        cj = int(min(n - 1, max(0, math.floor(c[1] * n))))
        near = 2
        for i in range(max(0, ci - near), min(n, ci + near + 1)):
            for j in range(max(0, cj - near), min(n, cj + near + 1)):
                x0, x1, y0, y1 = e[i], e[i + 1], e[j], e[j + 1]
                if x0 <= c[0] <= x1 and y0 <= c[1] <= y1:
                    total = 0.0
                    for ax, bx in ((x0, c[0]), (c[0], x1)):
                        for ay, by in ((y0, c[1]), (c[1], y1)):
                            total += self._corner_rect(abs(bx - ax), abs(by - ay))
                    avg[i, j] = total / (h * h)
                else:
                    avg[i, j] = self._gauss(x0, x1, y0, y1, 8) / (h * h)
        if quadrature == "midpoint":
            touch = np.zeros(grid.shape, bool)
            for i in range(max(0, ci - 1), min(n, ci + 2)):
                for j in range(max(0, cj - 1), min(n, cj + 2)):
                    touch[i, j] = e[i] <= c[0] <= e[i + 1] and e[j] <= c[1] <= e[j + 1]
            return np.where(touch, avg, mid)
        return avg


# ---------------------------------------------------------------------------
# level changes and serialization
# ---------------------------------------------------------------------------


def refine(f: GridFunction) -> GridFunction:
    """Replicate every cell value onto its ``2**dim`` children."""
    v = np.repeat(f.values, 2, axis=0)
    if f.grid.dim == 2:
        v = np.repeat(v, 2, axis=1)
    return GridFunction(f.grid.finer(), v)


def coarsen(f: GridFunction, by: int = 1) -> GridFunction:
    """Average children into parents (inverse of :func:`refine` on averages)."""
    g = f
    for _ in range(by):
        k = g.grid.n // 2
        v = _block_sum(g.values, 2) / (2**g.grid.dim)
        g = GridFunction(g.grid.coarser(), v)
    return g


def csv_text(f: GridFunction) -> str:
    """CSV body with a ``# dim=<d> level=<L>`` header line."""
    lines = [f"# dim={f.grid.dim} level={f.grid.level}"]
    if f.grid.dim == 1:
        lines.extend(repr(float(v)) for v in f.values)
    else:
        lines.extend(",".join(repr(float(v)) for v in row) for row in f.values)
    return "\n".join(lines) + "\n"


def write_csv(f: GridFunction, path) -> None:
    Path(path).write_text(csv_text(f))


def read_csv(path) -> GridFunction:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing '# dim=<d> level=<L>' header")
    meta = dict(tok.split("=") for tok in text[0][1:].split())
    grid = Grid(int(meta["dim"]), int(meta["level"]))
    rows = [line for line in text[1:] if line.strip()]
    vals = [float(x) for line in rows for x in line.split(",")]
    return GridFunction(grid, vals)
