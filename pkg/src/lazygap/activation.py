"""Hermite polynomials and activation profiles.

An activation sigma enters every downstream risk formula only through a
handful of scalars: its low-order Hermite coefficients

    lambda_k = E[sigma(G) He_k(G)],   G ~ N(0, 1),

and the residual second moment lambda_tilde = E[sigma(G)^2] - lambda_1^2
of the centered activation.  This module extracts those scalars by
quadrature against the standard Gaussian weight and packages them as an
``ActivationProfile``.

Probabilists' Hermite polynomials He_k are normalized so that
E[He_j(G) He_k(G)] = k! delta_jk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_hermitenorm

HERMITE_DEGREE_CAP = 64
DEFAULT_QUAD_ORDER = 200
DEGENERATE_TOL = 1e-10

# Below this order a pure Gauss-Hermite rule is used (exact on polynomials
# of degree <= 2*order - 1).  At or above it, a panelized Gauss-Legendre
# rule against the Gaussian weight takes over: its panel edge at the origin
# makes it accurate to ~1e-13 for kinked activations such as ReLU, which
# plain Gauss-Hermite only resolves to ~1e-3 at order 200.
_COMPOSITE_ORDER = 100

_PANEL_EDGES = np.array([0.0, 0.7, 1.5, 2.4, 3.4, 4.5, 5.7, 7.0, 8.6, 10.4, 12.5])


class ActivationError(ValueError):
    """Raised for invalid activations or quadrature failures."""


def hermite_eval(k: int, x):
    """Evaluate He_k(x) via the three-term recurrence.

    He_{k+1}(x) = x He_k(x) - k He_{k-1}(x), with He_0 = 1, He_1 = x.
    """
    if k < 0 or k != int(k):
        raise ActivationError(f"hermite degree must be a nonnegative integer, got {k}")
    if k > HERMITE_DEGREE_CAP:
        raise ActivationError(f"hermite degree {k} exceeds cap {HERMITE_DEGREE_CAP}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur if cur.ndim else float(cur)


def gaussian_quadrature(order: int):
    """Nodes and weights integrating f against the N(0, 1) density.

    Returns (x, w) with sum_i w_i f(x_i) ~ E[f(G)].
    """
    if order < 1:
        raise ActivationError("quadrature order must be positive")
    if order < _COMPOSITE_ORDER:
        x, w = roots_hermitenorm(order)
        return x, w / np.sqrt(2.0 * np.pi)
    # Panel edges cover the same range as the Hermite rule would; extra
    # geometric edges handle activations growing like exp(c x^2 / 2), c < 1.
    span = np.sqrt(4.0 * order + 2.0)
    edges = list(_PANEL_EDGES[_PANEL_EDGES < span])
    while edges[-1] * 1.25 < span:
        edges.append(edges[-1] * 1.25)
    edges.append(span)
    n_panels = len(edges) - 1
    per_panel = max(8, int(np.ceil((order / 2) / n_panels)))
    xs, ws = np.polynomial.legendre.leggauss(per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        t = mid + half * xs
        gw = half * ws * np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)
        nodes.extend((t, -t))
        weights.extend((gw, gw))
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class ActivationProfile:
    """Hermite data of a centered activation.

    ``lambda0`` records the mean that was subtracted; ``lambda1``,
    ``lambda2`` and ``lambda_tilde`` describe sigma - lambda0.
    """

    name: str
    lambda0: float
    lambda1: float
    lambda2: float
    lambda_tilde: float
    quad_order: int

    def __post_init__(self):
        if not all(
            np.isfinite(v)
            for v in (self.lambda0, self.lambda1, self.lambda2, self.lambda_tilde)
        ):
            raise ActivationError(f"non-finite Hermite data for {self.name!r}")
        if self.lambda_tilde < -1e-12:
            raise ActivationError(
                f"negative residual variance {self.lambda_tilde} for {self.name!r}"
            )
        # lambda_tilde = sum_{k>=2} lambda_k^2 / k! >= lambda_2^2 / 2
        if self.lambda_tilde < 0.5 * self.lambda2**2 - 1e-8:
            raise ActivationError(
                f"inconsistent profile for {self.name!r}: "
                f"lambda_tilde={self.lambda_tilde} < lambda2^2/2"
            )

    @property
    def degenerate(self) -> bool:
        """True when sigma is (numerically) affine, which no risk formula accepts."""
        return self.lambda_tilde <= DEGENERATE_TOL

    def require_usable(self):
        if self.degenerate:
            raise ActivationError(
                f"activation {self.name!r} is affine (lambda_tilde ~ 0); "
                "risk formulas require a nonlinear activation"
            )


def activation_profile(
    sigma: Callable[[np.ndarray], np.ndarray],
    quad_order: int = DEFAULT_QUAD_ORDER,
    name: str = "custom",
) -> ActivationProfile:
    """Extract (lambda0, lambda1, lambda2, lambda_tilde) of an activation.

    The stored coefficients describe the centered activation sigma - lambda0;
    all downstream formulas assume a centered activation and adding an offset
    does not change the risks they predict.
    """
    if quad_order < 20:
        raise ActivationError("quad_order must be at least 20")
    x, w = gaussian_quadrature(quad_order)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(sigma(x), dtype=float)
    if vals.shape != x.shape or not np.all(np.isfinite(vals)):
        raise ActivationError(f"activation {name!r} not evaluable on quadrature nodes")
    lambda0 = float(w @ vals)
    centered = vals - lambda0
    lambda1 = float(w @ (centered * x))
    lambda2 = float(w @ (centered * (x * x - 1.0)))
    second_moment = float(w @ (centered * centered))
    lambda_tilde = second_moment - lambda1**2
    if not np.isfinite(lambda_tilde):
        raise ActivationError(f"quadrature for {name!r} produced non-finite sums")
    return ActivationProfile(
        name=name,
        lambda0=lambda0,
        lambda1=lambda1,
        lambda2=lambda2,
        lambda_tilde=max(lambda_tilde, 0.0),
        quad_order=quad_order,
    )


def _quadratic(x):
    return x * x - 1.0


def _relu(x):
    return np.maximum(x, 0.0)


_REGISTRY: dict[str, Callable] = {
    "quadratic": _quadratic,
    "relu": _relu,
    "tanh": np.tanh,
}


def register_activation(name: str, sigma: Callable) -> None:
    """Add a named activation usable from serialized configs."""
    _REGISTRY[name] = sigma


def activation_function(name: str) -> Callable:
    if name not in _REGISTRY:
        raise ActivationError(
            f"unknown activation {name!r}; known: {sorted(_REGISTRY)}"
        )
    return _REGISTRY[name]


def profile_for(name: str, quad_order: int = DEFAULT_QUAD_ORDER) -> ActivationProfile:
    """Profile of a registered activation."""
    return activation_profile(activation_function(name), quad_order, name=name)
