"""Exact generalized travelling waves for quasilinear hyperbolic systems.

Construct solutions of U_t + A(U) U_x = B(U) that satisfy an appended set
of differential constraints, with barotropic Euler as the flagship model
and an independent finite-volume integrator as the verification oracle.
"""

from . import characteristics, constraints, fields, finite_volume, models
from . import systems, travelling
from .errors import GtwError

__version__ = "0.1.0"

__all__ = [
    "GtwError",
    "characteristics",
    "constraints",
    "fields",
    "finite_volume",
    "models",
    "systems",
    "travelling",
    "__version__",
]
