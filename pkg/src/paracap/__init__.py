"""Numerical laboratory for boundary regularity of nonlinear parabolic
equations with absorption on non-cylindrical space-time domains.

Submodules:
  geometry    space-time CSG domains, parabolic cylinders, windows, exhaustion
  potentials  parabolic Riesz and maximal potentials of discrete measures
  capacity    parabolic capacities, Hausdorff contents, Frostman measures
  wiener      Wiener-type series along shrinking cylinders, classification
  solver      monotone finite-difference schemes and measure-data solutions
  analysis    barriers, residual checks, transforms, certificates
  cli         reproducible experiment driver
"""

__version__ = "0.1.0"

from . import geometry  # noqa: F401
from . import gridfn  # noqa: F401
from . import potentials  # noqa: F401
from . import capacity  # noqa: F401
from . import solver  # noqa: F401
from . import wiener  # noqa: F401
from . import analysis  # noqa: F401
