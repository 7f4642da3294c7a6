"""Compact-support polynomial smoothing kernels.

All kernels here are even polynomials on ``[-1, 1]`` and vanish outside it,
so every integral the estimators need (kernel mass over an exposure
interval, first and second partial moments) has a closed form obtained
from polynomial antiderivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "Kernel",
    "QUARTIC",
    "EPANECHNIKOV",
    "TRIWEIGHT",
    "get_kernel",
    "eval_scaled",
    "integral_scaled",
    "moments",
]


@dataclass(frozen=True)
class Kernel:
    """Symmetric density supported on ``[-1, 1]``.

    Parameters
    ----------
    name : str
        Identifier used on the command line and in metadata.
    coef : tuple of float
        Power-series coefficients of the kernel on its support.
    mu2 : float
        Second moment ``int u^2 K(u) du``.
    l2sq : float
        Squared L2 norm ``int K(u)^2 du``.
    """

    name: str
    coef: tuple
    mu2: float
    l2sq: float
    _poly: Polynomial = field(init=False, repr=False, compare=False)
    _moment_antiderivs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        poly = Polynomial(self.coef)
        object.__setattr__(self, "_poly", poly)
        # antiderivatives of t^m K(t), anchored at -1, for m = 0, 1, 2
        anti = []
        for m in range(3):
            pm = (poly * Polynomial([0.0] * m + [1.0])).integ()
            anti.append(pm - pm(-1.0))
        object.__setattr__(self, "_moment_antiderivs", tuple(anti))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1.0, self._poly(np.clip(u, -1.0, 1.0)), 0.0)

    def antideriv(self, u):
        """``int_{-1}^{u} K(t) dt``, equal to 0 below -1 and 1 above 1."""
        return self.partial_moment(0, -1.0, u)

    def partial_moment(self, m: int, lo, hi):
        """``int_lo^hi t^m K(t) dt`` with the limits clipped to the support.

        Broadcasts over ``lo`` and ``hi``.
        """
        anti = self._moment_antiderivs[m]
        lo = np.clip(np.asarray(lo, dtype=float), -1.0, 1.0)
        hi = np.clip(np.asarray(hi, dtype=float), -1.0, 1.0)
        return anti(hi) - anti(lo)


def _coef(scale: float, power: int) -> tuple:
    # scale * (1 - u^2)^power expanded in powers of u
    base = Polynomial([1.0, 0.0, -1.0]) ** power
    return tuple(scale * c for c in base.coef)


QUARTIC = Kernel("quartic", _coef(15 / 16, 2), mu2=1 / 7, l2sq=5 / 7)
EPANECHNIKOV = Kernel("epanechnikov", _coef(3 / 4, 1), mu2=1 / 5, l2sq=3 / 5)
TRIWEIGHT = Kernel("triweight", _coef(35 / 32, 3), mu2=1 / 9, l2sq=350 / 429)

_REGISTRY = {k.name: k for k in (QUARTIC, EPANECHNIKOV, TRIWEIGHT)}
_REGISTRY["biweight"] = QUARTIC


def get_kernel(kernel) -> Kernel:
    """Resolve a kernel by name; kernel instances pass through."""
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return _REGISTRY[str(kernel).lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {kernel!r}; choose from quartic, epanechnikov, triweight"
        ) from None


def _check_bandwidth(h):
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")


def eval_scaled(kernel: Kernel, h: float, u):
    """``K(u / h) / h``."""
    _check_bandwidth(h)
    return kernel(np.asarray(u, dtype=float) / h) / h


def integral_scaled(kernel: Kernel, h: float, y, a, b):
    """Exact ``int_a^b K((y - u) / h) / h du``.

    Substituting ``t = (y - u) / h`` turns the integral into kernel mass on
    ``[(y - b) / h, (y - a) / h]``.
    """
    _check_bandwidth(h)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a > b):
        raise ValueError("integration limits must satisfy a <= b")
    y = np.asarray(y, dtype=float)
    return kernel.partial_moment(0, (y - b) / h, (y - a) / h)


def moments(kernel: Kernel) -> tuple[float, float]:
    """Return ``(mu2, l2sq)``."""
    return kernel.mu2, kernel.l2sq
