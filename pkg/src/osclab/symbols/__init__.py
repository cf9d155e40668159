"""Symbol algebra: Wick polynomials and plane-wave sums.

The module-level functions dispatch on the symbol class, so callers can write
``moyal(a, b, hbar)`` for either kind.
"""

import numpy as np

from . import planewave as _pw
from . import wick as _wk
from .planewave import (
    ArhoNorm,
    PlaneWaveSymbol,
    QuadratureAverage,
    average_planewave_quadrature,
    norm_As,
    norm_Arho_s,
    symplectic,
)
from .wick import WickSymbol, average, fourier_mode, grad

__all__ = [
    "WickSymbol", "PlaneWaveSymbol", "PhasePoint", "QuadratureAverage", "ArhoNorm",
    "evaluate", "grad", "mul", "poisson", "flow_pullback", "fourier_mode", "average",
    "average_planewave_quadrature", "moyal", "commutator_h", "norm_As", "norm_Arho_s",
    "symplectic",
]


def PhasePoint(*coords):
    """Validated phase point ``(x_1..x_d, xi_1..xi_d)`` as a float array."""
    z = np.asarray(coords[0] if len(coords) == 1 else coords, dtype=float).ravel()
    if z.size % 2 or z.size == 0:
        raise ValueError("phase point needs an even, nonzero number of entries")
    if not np.all(np.isfinite(z)):
        raise ValueError("phase point has non-finite entries")
    return z


def _impl(a, b=None):
    if isinstance(a, _wk.WickSymbol) and (b is None or isinstance(b, _wk.WickSymbol)):
        return _wk
    if isinstance(a, _pw.PlaneWaveSymbol) and (b is None or isinstance(b, _pw.PlaneWaveSymbol)):
        return _pw
    raise TypeError("mixed or unsupported symbol classes")


def evaluate(a, z):
    return _impl(a).evaluate(a, z)


def mul(a, b):
    return _impl(a, b).mul(a, b)


def poisson(a, b):
    return _impl(a, b).poisson(a, b)


def flow_pullback(a, tau):
    return _impl(a).flow_pullback(a, tau)


def moyal(a, b, hbar):
    return _impl(a, b).moyal(a, b, hbar)


def commutator_h(a, b, hbar):
    return _impl(a, b).commutator_h(a, b, hbar)
