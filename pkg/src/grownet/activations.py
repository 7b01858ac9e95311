"""The ten scalar activation functions networks can use, and their derivatives.

The zoo, by code:

    0 identity     x
    1 relu         max(0, x)
    2 sigmoid      1 / (1 + exp(-x))
    3 sign         -1 for x < 0, +1 for x >= 0
    4 atan         2*arctan(x)/pi
    5 softsign     x / (1 + |x|)
    6 softsquare   sign(x) * x^2 / (1 + x^2)
    7 tanh         tanh(x)
    8 hardtanh     clip to [-1, 1]
    9 ramp         x/2 on (0,1], (x+1)/4 on (1,3), 1 from 3 on; odd below 0

All evaluate to a finite value for every finite input. sign, atan,
softsign, softsquare, tanh, hardtanh, and ramp are odd. Derivatives use
the one-sided (right) limit at kinks; sign has derivative 0 everywhere.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from . import _engine


class ActivationKind(IntEnum):
    IDENTITY = 0
    RELU = 1
    SIGMOID = 2
    SIGN = 3
    ATAN = 4
    SOFTSIGN = 5
    SOFTSQUARE = 6
    TANH = 7
    HARDTANH = 8
    RAMP = 9

    @classmethod
    def from_name(cls, name: str) -> "ActivationKind":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown activation {name!r}") from None


#: Kinds satisfying f(-x) = -f(x) for all x.
ODD_KINDS = frozenset(
    {
        ActivationKind.IDENTITY,
        ActivationKind.SIGN,
        ActivationKind.ATAN,
        ActivationKind.SOFTSIGN,
        ActivationKind.SOFTSQUARE,
        ActivationKind.TANH,
        ActivationKind.HARDTANH,
        ActivationKind.RAMP,
    }
)
# sign is odd except at 0 itself (f(0) = 1); kept in the set for the
# almost-everywhere property used by tests, which skip 0 for it.


def activation_eval(kind: ActivationKind, x):
    """Evaluate the activation at ``x`` (scalar or ndarray)."""
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(_engine.act_value(int(kind), float(x)))
    xs = np.ascontiguousarray(x, dtype=np.float64)
    return _engine.act_value_array(int(kind), xs.ravel()).reshape(xs.shape)


def activation_deriv(kind: ActivationKind, x):
    """Derivative of the activation at ``x`` (scalar or ndarray).

    At non-differentiable points this is the right-hand derivative.
    """
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(_engine.act_slope(int(kind), float(x)))
    xs = np.ascontiguousarray(x, dtype=np.float64)
    return _engine.act_slope_array(int(kind), xs.ravel()).reshape(xs.shape)
