"""Viscoelastic wave simulator with fading memory, nonlinear damping, and a power source.

Subpackages cover the relaxation kernel, the discrete spatial domain, the
history/memory machinery, potential-well constants, the time integrator,
energy bookkeeping, decay-rate analysis, and blow-up detection.  The
``viscowave`` CLI (see :mod:`viscowave.cli`) drives scenario runs and the
built-in verification suite.
"""

__version__ = "0.1.0"

from .kernel import RelaxationKernel
from .grid import SpatialGrid

__all__ = ["RelaxationKernel", "SpatialGrid", "__version__"]
