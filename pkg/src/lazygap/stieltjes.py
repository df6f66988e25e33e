"""Fixed point of the Silverstein equation.

The asymptotic random-features risk depends on the feature spectrum only
through the positive solution psi of

    -lambda_tilde = -rho / psi + sum_j w_j * lambda1^2 t_j / (1 + lambda1^2 t_j psi),

where (t_j, w_j) are the atoms and weights of the limiting spectral
distribution of the rescaled feature covariance.  psi is the normalized
trace of the resolvent of the kernel's linear part, evaluated on the real
axis at -lambda_tilde; all atoms being nonnegative keeps every denominator
positive there, so the real fixed point is solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import SpectrumSpec


class StieltjesError(ArithmeticError):
    """Raised when the fixed-point solve cannot reach tolerance."""


@dataclass(frozen=True)
class PsiSolution:
    psi: float
    residual: float
    iterations: int


def _residual(psi, rho, l1sq, lam_tilde, t, w):
    return -lam_tilde + rho / psi - float(np.sum(w * l1sq * t / (1.0 + l1sq * t * psi)))


def solve_psi(rho, lambda1, lambda_tilde, spectrum: SpectrumSpec,
              tol=1e-12, max_iter=500) -> PsiSolution:
    """Solve for psi > 0.

    Fixed-point iteration psi <- rho / (lambda_tilde + S(psi)) from
    psi0 = rho / lambda_tilde; the map is increasing and the iterates
    decrease monotonically to the unique root, so convergence is fast.
    A bisection fallback on the bracket
    [rho / (lambda_tilde + lambda1^2 max t), rho / lambda_tilde] guards
    pathological inputs.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if lambda_tilde <= 0:
        raise ValueError(
            f"lambda_tilde must be positive, got {lambda_tilde} (degenerate profile)"
        )
    t = spectrum.atoms
    w = spectrum.weights
    l1sq = lambda1 * lambda1

    psi = rho / lambda_tilde
    res = _residual(psi, rho, l1sq, lambda_tilde, t, w)
    iters = 0
    while abs(res) > tol and iters < max_iter:
        psi = rho / (lambda_tilde + float(np.sum(w * l1sq * t / (1.0 + l1sq * t * psi))))
        res = _residual(psi, rho, l1sq, lambda_tilde, t, w)
        iters += 1
    if abs(res) <= tol:
        return PsiSolution(psi=psi, residual=res, iterations=iters)

    lo = rho / (lambda_tilde + l1sq * float(t.max()))
    hi = rho / lambda_tilde
    flo = _residual(lo, rho, l1sq, lambda_tilde, t, w)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        fmid = _residual(mid, rho, l1sq, lambda_tilde, t, w)
        iters += 1
        if abs(fmid) <= tol:
            return PsiSolution(psi=mid, residual=fmid, iterations=iters)
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise StieltjesError(
        f"psi solve did not converge: last residual {fmid:.3e} after {iters} iterations"
    )


def effective_resolvent(psi: float, kappa: float) -> float:
    """The limiting normalized quadratic form psi / (1 + kappa psi)."""
    if psi <= 0:
        raise ValueError(f"psi must be positive, got {psi}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    return psi / (1.0 + kappa * psi)
