"""Damped least-squares (Levenberg-Marquardt style) minimizer.

Minimizes ``chi2(p) = sum_i w_i (y_i - f(x_i, p))^2`` with analytic
Jacobians. The damping term uses Marquardt's diagonal scaling, starting
at 1e-3, multiplied by 10 on a rejected step and divided by 10 on an
accepted one; iteration stops once an accepted step reduces the
objective by less than 1e-10 relative, or after 200 iterations.

Standard errors come from the unscaled covariance ``(J^T W J)^-1`` at
the optimum, i.e. the weights are taken to be true inverse variances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DegenerateDataError",
    "FitConvergenceError",
    "FitError",
    "FitResult",
    "SingularDesignError",
    "chi_square",
    "chi_square_gradient",
    "least_squares",
]

DEFAULT_DAMPING = 1e-3
DAMPING_STEP = 10.0
MAX_ITERATIONS = 200
RELATIVE_DECREASE_TOL = 1e-10
_DAMPING_CEILING = 1e14


class FitError(RuntimeError):
    pass


class DegenerateDataError(FitError):
    """Data carry no information for the requested model (zero variance)."""


class SingularDesignError(FitError):
    """Design matrix is singular (e.g. all abscissae identical)."""


class FitConvergenceError(FitError):
    """No convergence within the iteration budget; carries the last state."""

    def __init__(self, message: str, last_result: "FitResult"):
        super().__init__(message)
        self.last_result = last_result


@dataclass(frozen=True)
class FitResult:
    """Named best-fit parameters with standard errors and fit diagnostics."""

    names: tuple[str, ...]
    values: np.ndarray
    stderrs: np.ndarray
    reduced_chi_square: float
    converged: bool
    iterations: int

    @property
    def parameters(self) -> dict[str, tuple[float, float]]:
        return {
            name: (float(v), float(s))
            for name, v, s in zip(self.names, self.values, self.stderrs)
        }

    def value(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.stderrs[self.names.index(name)])


def chi_square(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    params: np.ndarray,
) -> float:
    residual = y - model(x, params)
    return float(np.sum(weights * residual * residual))


def chi_square_gradient(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    params: np.ndarray,
) -> np.ndarray:
    """Analytic gradient of the weighted objective, ``-2 J^T W r``."""
    residual = y - model(x, params)
    return -2.0 * jacobian(x, params).T @ (weights * residual)


def least_squares(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: Sequence[float] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    weights: Sequence[float] | np.ndarray,
    initial: Sequence[float] | np.ndarray,
    names: Sequence[str],
    *,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """Run the damped least-squares loop from ``initial``.

    ``model(x, p)`` returns predictions, ``jacobian(x, p)`` the
    ``(n_points, n_params)`` derivative matrix.

    Raises
    ------
    FitConvergenceError
        If the iteration budget runs out before the relative-decrease
        test is met; the exception carries the last state.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    p = np.asarray(initial, dtype=float).copy()
    names = tuple(names)
    if x.size != y.size or w.size != y.size:
        raise FitError("x, y and weights must have matching lengths")
    if x.size <= p.size:
        raise FitError(f"need more than {p.size} points to fit {p.size} parameters")

    chi2 = chi_square(model, x, y, w, p)
    damping = DEFAULT_DAMPING
    converged = False
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        jac = jacobian(x, p)
        residual = y - model(x, p)
        grad = jac.T @ (w * residual)
        hess = (jac.T * w) @ jac
        diag = np.maximum(np.diag(hess), 1e-300)

        stepped = False
        while damping < _DAMPING_CEILING:
            try:
                step = np.linalg.solve(hess + damping * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                damping *= DAMPING_STEP
                continue
            trial = p + step
            chi2_trial = chi_square(model, x, y, w, trial)
            if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                decrease = chi2 - chi2_trial
                p = trial
                chi2 = chi2_trial
                damping = max(damping / DAMPING_STEP, 1e-12)
                stepped = True
                if decrease <= RELATIVE_DECREASE_TOL * max(chi2, 1e-300):
                    converged = True
                break
            damping *= DAMPING_STEP
        if not stepped:
            # Damping exhausted: no downhill step exists to working precision.
            converged = True
        if converged:
            break

    dof = x.size - p.size
    stderrs = _standard_errors(model, jacobian, x, p, w)
    result = FitResult(
        names=names,
        values=p,
        stderrs=stderrs,
        reduced_chi_square=chi_square(model, x, y, w, p) / dof,
        converged=converged,
        iterations=iterations,
    )
    if not converged:
        raise FitConvergenceError(
            f"no convergence after {iterations} iterations (chi2={chi2:.6g})", result
        )
    return result


def _standard_errors(model, jacobian, x, params, weights) -> np.ndarray:
    """sqrt of the covariance diagonal; NaN where the Hessian is singular."""
    jac = jacobian(x, params)
    hess = (jac.T * weights) @ jac
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return np.full(params.size, np.nan)
    diag = np.diag(cov).copy()
    diag[diag < 0.0] = np.nan
    return np.sqrt(diag)
