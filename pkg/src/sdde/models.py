"""Registry of named models.

All builtins are scalar (d = m = 1) with a single delay unless noted.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import UnknownModel
from .model import CoefficientField, DelaySpec, InitialSegment, SddeModel

_REGISTRY: dict[str, Callable[[], SddeModel]] = {}
_DESCRIPTIONS: dict[str, str] = {}


def register(label: str, factory: Callable[[], SddeModel], description: str = "") -> None:
    """Make ``builtin(label)`` return ``factory()``. Overwrites silently."""
    _REGISTRY[label] = factory
    _DESCRIPTIONS[label] = description


def unregister(label: str) -> None:
    _REGISTRY.pop(label, None)
    _DESCRIPTIONS.pop(label, None)


def builtin(label: str) -> SddeModel:
    try:
        factory = _REGISTRY[label]
    except KeyError:
        raise UnknownModel(f"unknown model {label!r}; known: {', '.join(sorted(_REGISTRY))}") from None
    return factory()


def list_models() -> dict[str, str]:
    return dict(sorted(_DESCRIPTIONS.items()))


def _col(v):
    # (..., d) -> (..., d, 1) for scalar-noise diffusions
    return v[..., None]


def _drift_only():
    coeffs = CoefficientField(
        1, 1, 1,
        beta=lambda t, y, x: np.ones_like(x),
        alpha=lambda t, y, x: np.zeros(x.shape + (1,)),
        x_free=True,
    )
    return SddeModel(coeffs, (DelaySpec.fixed(1.0),), InitialSegment.constant(1.0, C=1.0), T=2.0,
                     label="drift_only")


def _pure_sde_gbm(mu=0.1, sigma=0.2):
    coeffs = CoefficientField(
        1, 1, 1,
        beta=lambda t, y, x: mu * x,
        alpha=lambda t, y, x: _col(sigma * x),
    )
    return SddeModel(coeffs, (DelaySpec.fixed(1.0),), InitialSegment.constant(1.0, C=1.0), T=1.0,
                     label="pure_sde_gbm")


def linear_pure_delay(a=0.5, b=0.3, tau=0.5, T=2.0, scale=1.0):
    """beta = a*y, alpha = b*y, xi(t) = scale*(1 + t)."""
    coeffs = CoefficientField(
        1, 1, 1,
        beta=lambda t, y, x: a * y[..., 0, :],
        alpha=lambda t, y, x: _col(b * y[..., 0, :]),
        x_free=True,
    )
    xi = InitialSegment(tau, 1, lambda t: [scale * (1.0 + t)])
    return SddeModel(coeffs, (DelaySpec.fixed(tau),), xi, T=T, label="linear_pure_delay")


def _delay_gbm(mu=0.1, sigma=0.2):
    coeffs = CoefficientField(
        1, 1, 1,
        beta=lambda t, y, x: mu * y[..., 0, :] * x,
        alpha=lambda t, y, x: _col(sigma * y[..., 0, :] * x),
    )
    return SddeModel(coeffs, (DelaySpec.fixed(0.5),), InitialSegment.constant(1.0, C=0.5), T=2.0,
                     label="delay_gbm")


def _monotone_cubic():
    coeffs = CoefficientField(
        1, 1, 1,
        beta=lambda t, y, x: -x**3 + y[..., 0, :],
        alpha=lambda t, y, x: _col(0.2 * y[..., 0, :]),
    )
    return SddeModel(coeffs, (DelaySpec.fixed(0.5),), InitialSegment.constant(1.0, C=0.5), T=1.0,
                     label="monotone_cubic", condition_class="A3")


def _two_delay_mixed():
    coeffs = CoefficientField(
        1, 1, 2,
        beta=lambda t, y, x: 0.3 * y[..., 0, :] - 0.2 * y[..., 1, :] - x,
        alpha=lambda t, y, x: _col(0.1 * (y[..., 0, :] + x)),
    )
    delays = (DelaySpec.fixed(0.5), DelaySpec.piecewise_constant(0.5))
    return SddeModel(coeffs, delays, InitialSegment.constant(1.0, C=0.5), T=2.0,
                     label="two_delay_mixed")


register("drift_only", _drift_only, "beta=1, alpha=0, xi=1, T=2; exact solution 1+t")
register("pure_sde_gbm", _pure_sde_gbm, "beta=0.1x, alpha=0.2x, delay unused, T=1")
register("linear_pure_delay", linear_pure_delay,
         "beta=0.5y, alpha=0.3y, tau=0.5, xi=1+t, T=2; method-of-steps oracle available")
register("delay_gbm", _delay_gbm, "beta=0.1yx, alpha=0.2yx, tau=0.5, xi=1, T=2")
register("monotone_cubic", _monotone_cubic, "beta=-x^3+y, alpha=0.2y, tau=0.5, xi=1, T=1")
register("two_delay_mixed", _two_delay_mixed,
         "k=2 (fixed + piecewise-constant), beta=0.3y1-0.2y2-x, alpha=0.1(y1+x), T=2")
