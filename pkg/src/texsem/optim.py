"""Dense BFGS minimizer with a strong Wolfe line search.

The line search brackets and then refines steps by cubic interpolation.
Because the two-point cubic fit is exact for quadratic objectives, the
search returns the exact 1-D minimizer on quadratics, which gives the
classic finite-termination behavior of BFGS on strictly convex quadratic
problems (at most `dim` accepted steps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import TexsemError

WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9

_CURVATURE_SKIP = 1e-10


class NumericError(TexsemError):
    """Non-finite objective or gradient at an accepted iterate.

    Carries the last good iterate in `last_x` so callers can diagnose.
    """

    def __init__(self, message: str, last_x=None, last_f: float | None = None):
        super().__init__(message)
        self.last_x = None if last_x is None else np.array(last_x, dtype=float)
        self.last_f = last_f


@dataclass(frozen=True)
class OptimProblem:
    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OptimResult:
    x_star: np.ndarray
    f_star: float
    iterations: int
    grad_norm: float
    converged: bool


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient: (f(x+h e_k) - f(x-h e_k)) / 2h."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        step = np.zeros_like(x)
        step[k] = h
        grad[k] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def _cubic_minimizer(a, fa, ga, b, fb, gb) -> Optional[float]:
    """Minimizer of the cubic through (a, fa, ga) and (b, fb, gb).

    Exact for quadratic data. Returns None when the fit is degenerate.
    """
    if a == b:
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0.0 or not math.isfinite(disc):
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0.0:
        return None
    alpha = b - (b - a) * (gb + d2 - d1) / denom
    if not math.isfinite(alpha):
        return None
    return alpha


def _zoom(phi, a_lo, f_lo, g_lo, a_hi, f_hi, g_hi, f0, g0, consider, max_iter=30):
    """Strong-Wolfe zoom on a bracket [a_lo, a_hi] (Nocedal alg. 3.6 shape)."""
    for _ in range(max_iter):
        alpha = _cubic_minimizer(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        lo, hi = (a_lo, a_hi) if a_lo < a_hi else (a_hi, a_lo)
        width = hi - lo
        if (
            alpha is None
            or not (lo < alpha < hi)
            or min(alpha - lo, hi - alpha) < 1e-3 * width
        ):
            alpha = 0.5 * (lo + hi)
        fa, ga = phi(alpha)
        consider(alpha, fa, ga)
        if not math.isfinite(fa) or fa > f0 + WOLFE_C1 * alpha * g0 or fa >= f_lo:
            a_hi, f_hi, g_hi = alpha, fa, ga
        else:
            if abs(ga) <= -WOLFE_C2 * g0:
                return alpha, fa, ga
            if ga * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
            a_lo, f_lo, g_lo = alpha, fa, ga
        if width < 1e-14 * max(1.0, abs(a_lo)):
            break
    # Best effort: the low end satisfies the Armijo condition.
    if math.isfinite(f_lo) and f_lo <= f0 + WOLFE_C1 * a_lo * g0 and a_lo > 0.0:
        return a_lo, f_lo, g_lo
    return None


def _polish(phi, f0, g0, accepted, other, rounds=3):
    """Secant iteration on the directional derivative around an accepted step.

    Exact in one step for quadratic objectives (phi' is affine there), so
    accepted steps become exact 1-D minimizers up to rounding. Only replaces
    the accepted point with candidates that still satisfy strong Wolfe.
    """
    a_best, f_best, g_best = accepted
    noise = 64.0 * np.finfo(float).eps * (abs(f0) + 1.0)
    x0, g0_ = other
    x1, g1_ = a_best, g_best
    for _ in range(rounds):
        if abs(g_best) <= 1e-16 * max(1.0, abs(g0)) or g1_ == g0_:
            break
        cand = x1 - g1_ * (x1 - x0) / (g1_ - g0_)
        if not math.isfinite(cand) or cand <= 0.0:
            break
        fc, gc = phi(cand)
        if not (math.isfinite(fc) and math.isfinite(gc)):
            break
        if (
            abs(gc) < abs(g_best)
            and fc <= f0 + min(WOLFE_C1 * cand * g0 + noise, noise)
            and abs(gc) <= -WOLFE_C2 * g0
        ):
            a_best, f_best, g_best = cand, fc, gc
        x0, g0_, x1, g1_ = x1, g1_, cand, gc
    return a_best, f_best, g_best


def _line_search(phi, f0, g0, alpha0=1.0, max_expand=20):
    """Find alpha satisfying the strong Wolfe conditions.

    phi(alpha) must return (value, directional derivative). Non-finite trial
    values are treated as "too far" and shrink the bracket. Near convergence
    the measured decrease falls below float noise; a derivative-based
    fallback (approximate Wolfe with ulp-scale slack) then accepts the step
    rather than stalling one iteration short of the tolerance. Returns
    (alpha, f, g) or None when no acceptable step exists.
    """
    noise = 64.0 * np.finfo(float).eps * (abs(f0) + 1.0)
    fallback = []

    def consider(a, fa, ga):
        if (
            math.isfinite(fa)
            and math.isfinite(ga)
            and a > 0.0
            and abs(ga) <= -WOLFE_C2 * g0
            and fa <= f0 + noise
        ):
            if not fallback or abs(ga) < abs(fallback[0][2]):
                fallback.insert(0, (a, fa, ga))

    def finish(result, other):
        if result is not None:
            return _polish(phi, f0, g0, result, other)
        if fallback:
            return _polish(phi, f0, g0, fallback[0], other)
        return None

    a_prev, f_prev, g_prev = 0.0, f0, g0
    alpha = alpha0
    for i in range(max_expand):
        fa, ga = phi(alpha)
        consider(alpha, fa, ga)
        if not math.isfinite(fa) or not math.isfinite(ga):
            # Retreat: bracket between the last good point and here.
            hi_f = fa if math.isfinite(fa) else f_prev + abs(f_prev) + 1.0
            hi_g = ga if math.isfinite(ga) else 0.0
            result = _zoom(phi, a_prev, f_prev, g_prev, alpha, hi_f, hi_g, f0, g0, consider)
            if result is not None:
                return _polish(phi, f0, g0, result, (a_prev, g_prev))
            alpha = 0.5 * (a_prev + alpha)
            continue
        if fa > f0 + WOLFE_C1 * alpha * g0 or (i > 0 and fa >= f_prev):
            result = _zoom(phi, a_prev, f_prev, g_prev, alpha, fa, ga, f0, g0, consider)
            return finish(result, (alpha, ga))
        if abs(ga) <= -WOLFE_C2 * g0:
            return _polish(phi, f0, g0, (alpha, fa, ga), (a_prev, g_prev))
        if ga >= 0.0:
            result = _zoom(phi, alpha, fa, ga, a_prev, f_prev, g_prev, f0, g0, consider)
            return finish(result, (a_prev, g_prev))
        a_prev, f_prev, g_prev = alpha, fa, ga
        alpha *= 2.0
    return finish(None, (a_prev, g_prev))


def bfgs_minimize(problem: OptimProblem, x0, tol: float = 1e-8,
                  max_iter: int = 200) -> OptimResult:
    """Minimize a smooth unconstrained problem with dense BFGS.

    Terminates when the infinity norm of the gradient drops to `tol` or
    after `max_iter` accepted steps. Curvature pairs with
    s'y <= 1e-10 * |s||y| are skipped to keep the inverse Hessian
    approximation positive definite.
    """
    x = np.array(x0, dtype=float).ravel()
    if x.size != problem.dim:
        raise ValueError(f"x0 has {x.size} entries, problem.dim is {problem.dim}")
    f = float(problem.objective(x))
    if not math.isfinite(f):
        raise NumericError("objective non-finite at starting point", last_x=x, last_f=f)
    g = np.asarray(problem.gradient(x), dtype=float).ravel()
    if not np.isfinite(g).all():
        raise NumericError("gradient non-finite at starting point", last_x=x, last_f=f)

    n = x.size
    H = np.eye(n)
    first_update = True
    iterations = 0
    gnorm = float(np.max(np.abs(g))) if n else 0.0

    while gnorm > tol and iterations < max_iter:
        p = -H @ g
        dphi0 = float(p @ g)
        if dphi0 >= 0.0:
            # Numerical loss of descent; restart from steepest descent.
            H = np.eye(n)
            p = -g
            dphi0 = float(p @ g)
            if dphi0 >= 0.0:
                break

        def phi(alpha, _x=x, _p=p):
            xt = _x + alpha * _p
            ft = float(problem.objective(xt))
            gt = problem.gradient(xt)
            return ft, float(np.dot(gt, _p))

        found = _line_search(phi, f, dphi0)
        if found is None:
            break
        alpha, f_new, _ = found
        x_new = x + alpha * p
        g_new = np.asarray(problem.gradient(x_new), dtype=float).ravel()
        if not math.isfinite(f_new) or not np.isfinite(g_new).all():
            raise NumericError(
                "objective or gradient became non-finite", last_x=x, last_f=f
            )

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        # Relative curvature test: an absolute threshold would reject every
        # (tiny) late-stage pair and freeze the Hessian approximation.
        if sy > _CURVATURE_SKIP * float(np.linalg.norm(s) * np.linalg.norm(y)):
            if first_update:
                H *= sy / float(y @ y)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ y
            # H <- (I - rho s y') H (I - rho y s') + rho s s'
            H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
            H += rho * rho * float(y @ Hy) * np.outer(s, s)
            H += rho * np.outer(s, s)

        x, f, g = x_new, f_new, g_new
        gnorm = float(np.max(np.abs(g)))
        iterations += 1

    return OptimResult(
        x_star=x,
        f_star=f,
        iterations=iterations,
        grad_norm=gnorm,
        converged=bool(gnorm <= tol),
    )
