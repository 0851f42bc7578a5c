"""Anisotropic tensor calculus for pseudo-Finsler metrics on a coordinate chart.

Fundamental and Cartan tensors, sprays and geodesics, Berwald and Chern
connections, anisotropic curvature, Jacobi fields and anisotropic Lie
derivatives, all differentiated exactly with nested forward-mode AD in
double precision.
"""

import jax

jax.config.update("jax_enable_x64", True)

from . import connections, curvature, derivation, finsler, lie, spray, tensors  # noqa: E402
from .connections import *  # noqa: E402,F401,F403
from .curvature import *  # noqa: E402,F401,F403
from .derivation import *  # noqa: E402,F401,F403
from .errors import (  # noqa: E402,F401
    AnisotropicError,
    ConfigError,
    DegeneracyError,
    DomainError,
    EvaluationError,
    IntegrationError,
    PreconditionError,
)
from .finsler import *  # noqa: E402,F401,F403
from .lie import *  # noqa: E402,F401,F403
from .spray import *  # noqa: E402,F401,F403
from .tensors import *  # noqa: E402,F401,F403

__version__ = "0.1.0"
