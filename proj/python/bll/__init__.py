"""Boundary-layer laboratory python interface.

Thin re-export of the compiled module: grid/field construction, the
expansion pipeline, the Navier-Stokes solver, norms, rate fitting, and the
sweep harness.
"""

try:
    from ._bll import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # pragma: no cover - build-tree layout
    from _bll import *  # noqa: F401,F403
