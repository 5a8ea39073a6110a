"""Fixed, seeded test-function families.

A suite is a list of :class:`SuiteItem` records defined in physical
coordinates, so the same suite can be realized on several grid levels and
constants compared across refinement.  The one exception is the
``adversarial`` suite, whose members live on the first few cells of the
grid they are realized on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Expr, Grid, GridFunction, sample, sample_callable

__all__ = ["SuiteItem", "SUITES", "build_suite", "realize", "suite_names"]


@dataclass(frozen=True)
class SuiteItem:
    name: str
    expr: object  # Expr or callable(x) or callable(grid) -> GridFunction
    grid_dependent: bool = False

    def on(self, grid: Grid) -> GridFunction:
        if self.grid_dependent:
            return self.expr(grid)
        return sample(self.expr, grid)


def _trig(rng, dim, modes=5):
    amp = rng.normal(size=(modes,) + (modes,) * (dim - 1)) / (1.0 + np.arange(modes))
    phase = rng.uniform(0, 2 * np.pi, size=amp.shape)

    def fn(x):
        out = 0.0
        for idx in np.ndindex(amp.shape):
            arg = sum(2 * np.pi * (k + 1) * x[a] for a, k in enumerate(idx))
            out = out + amp[idx] * np.cos(arg + phase[idx])
        return out + 0.0 * x[0]

    return fn


def _smooth(seed, dim, n):
    rng = np.random.default_rng(seed)
    return [SuiteItem(f"trig{i}", _trig(rng, dim)) for i in range(n)]


def _indicators(seed, dim, n):
    rng = np.random.default_rng(seed + 1)
    out = []
    for i in range(n):
        lo = rng.uniform(0.0, 0.8, size=dim)
        hi = lo + rng.uniform(0.05, 0.2, size=dim)
        out.append(SuiteItem(f"ind{i}", Expr("indicator", lo=lo.tolist(), hi=hi.tolist(), value=1.0)))
    return out


def _ramps(seed, dim, n):
    rng = np.random.default_rng(seed + 2)
    out = []
    for i in range(n):
        a = float(rng.uniform(0.0, 0.5))
        b = a + float(rng.uniform(0.1, 0.5))
        out.append(SuiteItem(f"ramp{i}", Expr("ramp", a=a, b=b, slope=float(rng.uniform(0.5, 4.0)))))
    return out


def _spikes(seed, dim, n):
    rng = np.random.default_rng(seed + 3)
    out = []
    for i in range(n):
        c = rng.uniform(0.1, 0.9, size=dim).tolist()
        alpha = -float(rng.uniform(0.1, 0.45)) * dim
        out.append(SuiteItem(f"spike{i}", Expr("power", alpha=alpha, center=c)))
    return out


def _adversarial(seed, dim, n):
    def make(j):
        def build(grid):
            v = np.zeros(grid.shape)
            v[(slice(0, 2**j),) * grid.dim] = 1.0
            return GridFunction(grid, v)

        return build

    return [SuiteItem(f"corner{j}", make(j), grid_dependent=True) for j in range(n)]


def _log_symbols(seed, dim, n):
    rng = np.random.default_rng(seed + 4)
    centers = [0.0, 0.5] + [float(c) for c in rng.uniform(0.1, 0.9, size=max(0, n - 2))]
    return [SuiteItem(f"log{i}", Expr("log", center=c)) for i, c in enumerate(centers[:n])]


def _mixed(seed, dim, n):
    k = max(1, n // 4)
    items = _smooth(seed, dim, k) + _indicators(seed, dim, k) + _ramps(seed, dim, k) + _spikes(seed, dim, n - 3 * k)
    return items[:n]


SUITES: dict[str, tuple[Callable, int]] = {
    "smooth": (_smooth, 8),
    "indicators": (_indicators, 8),
    "ramps": (_ramps, 6),
    "spikes": (_spikes, 6),
    "adversarial": (_adversarial, 4),
    "log_symbols": (_log_symbols, 4),
    "mixed": (_mixed, 20),
}


def suite_names() -> list:
    return sorted(SUITES)


def build_suite(name: str, dim: int = 1, seed: int = 0, size: int | None = None) -> list:
    """Grid-independent suite definition."""
    try:
        maker, default = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {suite_names()}") from None
    return maker(int(seed), dim, default if size is None else int(size))


def realize(suite, grid: Grid, *, mean_zero: bool = False) -> list:
    """Sample every item on ``grid``; ``mean_zero`` subtracts the mean."""
    out = []
    for item in suite:
        f = item.on(grid)
        if mean_zero:
            f = f.like(f.values - f.values.mean())
        out.append(f)
    return out
