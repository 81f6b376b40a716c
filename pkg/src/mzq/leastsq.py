"""Damped least-squares minimization with finite-difference Jacobians.

Small Levenberg-Marquardt engine used by the estimation layer. The residual
function maps a parameter vector to a 1-d residual array; the engine
minimizes the sum of squared residuals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import t as student_t

FD_REL_STEP = 1e-6
DAMPING_INIT = 1e-3
DAMPING_MAX = 1e14


class BadInitialization(ValueError):
    """Raised when the starting point gives unusable residuals."""


class NoConvergence(ArithmeticError):
    """Raised by callers when a fit fails to converge."""


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    cost_history: list[float]
    residual: np.ndarray
    jacobian: np.ndarray
    iterations: int
    converged: bool


def _jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
              r0: np.ndarray, x_scale: np.ndarray) -> np.ndarray:
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = FD_REL_STEP * max(abs(x[i]), x_scale[i])
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fn(xp) - r0) / h
    return jac


def levenberg_marquardt(fn: Callable[[np.ndarray], np.ndarray],
                        x0: Sequence[float],
                        x_scale: Sequence[float] | None = None,
                        max_iter: int = 200,
                        ftol: float = 1e-10,
                        xtol: float = 1e-8) -> LMResult:
    """Minimize sum(fn(x)**2) from x0.

    x_scale sets the characteristic size of each parameter. The search runs
    in units of x_scale so damping treats rad/s-sized and order-one
    parameters evenly, and finite-difference steps stay sensible when a
    parameter passes through zero. Convergence is declared when an accepted
    step improves the cost by less than ftol relative, when the accepted
    step is smaller than xtol in scaled units, or when no damping value
    yields an improvement (a numerical stationary point). Hitting max_iter
    leaves converged False. The returned jacobian is in x units.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1 or x.size == 0:
        raise BadInitialization("x0 must be a nonempty 1-d vector")
    scale = np.ones_like(x) if x_scale is None else np.asarray(x_scale, dtype=float)
    if scale.shape != x.shape or np.any(scale <= 0) or not np.all(np.isfinite(scale)):
        raise BadInitialization("x_scale must be positive, finite, same length as x0")

    z = x / scale
    unit = np.ones_like(z)

    def fn_z(zv: np.ndarray) -> np.ndarray:
        return np.asarray(fn(zv * scale), dtype=float)

    r = fn_z(z)
    if r.ndim != 1 or r.size < z.size:
        raise BadInitialization("need at least as many residuals as parameters")
    if not np.all(np.isfinite(r)):
        raise BadInitialization("residuals are not finite at the starting point")

    cost = float(r @ r)
    history = [cost]
    lam = DAMPING_INIT
    jac = _jacobian(fn_z, z, r, unit)
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))

        accepted = False
        while lam <= DAMPING_MAX:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            z_new = z + step
            r_new = fn_z(z_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                break
            lam *= 10

        if not accepted:
            # no damping admits a downhill step: stationary to working precision
            converged = True
            break

        improvement = cost - cost_new
        step_size = float(np.max(np.abs(step)))
        z, r, cost = z_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 3, 1e-12)
        jac = _jacobian(fn_z, z, r, unit)
        if (cost == 0.0 or improvement <= ftol * max(cost, 1e-300)
                or step_size <= xtol * (1.0 + float(np.max(np.abs(z))))):
            converged = True
            break

    return LMResult(x=z * scale, cost=cost, cost_history=history, residual=r,
                    jacobian=jac / scale, iterations=iterations, converged=converged)


def covariance(result: LMResult) -> np.ndarray:
    """Parameter covariance s^2 (J^T J)^-1 with s^2 the residual variance."""
    m, n = result.jacobian.shape
    dof = max(m - n, 1)
    s2 = result.cost / dof
    jtj = result.jacobian.T @ result.jacobian
    try:
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(jtj)
    return s2 * inv


def confidence_half_widths(result: LMResult, level: float = 0.95) -> np.ndarray:
    """Student-t half-widths of the marginal parameter confidence intervals."""
    m, n = result.jacobian.shape
    dof = max(m - n, 1)
    quantile = student_t.ppf(0.5 + level / 2, dof)
    var = np.diag(covariance(result)).copy()
    var[var < 0] = 0.0
    return quantile * np.sqrt(var)
