"""Discrete laboratory for weighted norm inequalities on dyadic grids.

The package works on the unit cube ``[0, 1)^dim`` (``dim`` in ``{1, 2}``)
discretized into ``2**level`` cells per axis.  Functions are piecewise
constant on cells.  Suprema "over all cubes" run over an explicit
:class:`CubeFamily`.
"""

__version__ = "0.1.0"

from .grid import (
    Cube,
    CubeFamily,
    Grid,
    GridFunction,
    Measure,
    cube_average,
    enumerate_family,
    refine,
    coarsen,
    sample,
)

__all__ = [
    "Cube",
    "CubeFamily",
    "Grid",
    "GridFunction",
    "Measure",
    "cube_average",
    "enumerate_family",
    "refine",
    "coarsen",
    "sample",
    "__version__",
]
