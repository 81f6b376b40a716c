"""Slow reference implementations the test suite checks the library against.

Everything here is written for transparency, not speed: straight loops,
textbook elimination, and a stochastic simulation with exact one-step
updates. Production code must agree with these within stated tolerances.
"""
import numpy as np


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            acc = 0j
            for l in range(k):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc
    return out


def solve_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting for a square system."""
    a = np.array(a, dtype=complex)
    b = np.array(b, dtype=complex)
    n = a.shape[0]
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot, col]) == 0:
            raise ZeroDivisionError("singular system")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros(n, dtype=complex)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def port_solution_oracle(total: np.ndarray, a4_in: complex, a2_in: complex) -> np.ndarray:
    """Solve the four outgoing amplitudes straight from the mode relation.

    The defining relation maps (a4_in, a4_out, a2_in, a2_out) to
    (a1_out, a1_in, a3_out, a3_in) with a1_in = a3_in = 0. The linear system
    in the unknowns u = (a1_out, a3_out, a4_out, a2_out) is built numerically
    by probing the relation on unit vectors, then eliminated.
    """
    total = np.asarray(total, dtype=complex)

    def gap(u):
        a1_out, a3_out, a4_out, a2_out = u
        right = np.array([a4_in, a4_out, a2_in, a2_out], dtype=complex)
        left = np.array([a1_out, 0.0, a3_out, 0.0], dtype=complex)
        return total @ right - left

    rhs = -gap(np.zeros(4, dtype=complex))
    cols = [gap(e) + rhs for e in np.eye(4, dtype=complex)]
    return solve_oracle(np.stack(cols, axis=1), rhs)


def ou_coherence_mc(v: float, kappa: float, taus: np.ndarray,
                    n_traj: int = 100000, seed: int = 1) -> np.ndarray:
    """Monte-Carlo dephasing curve mean(cos(phi)) over noise trajectories.

    The detuning follows an Ornstein-Uhlenbeck process with stationary
    standard deviation v and rate kappa; phi is its running time integral.
    Between requested times the pair (detuning, phase increment) is drawn
    from its exact joint Gaussian law, so the only error is sampling noise.
    """
    rng = np.random.default_rng(seed)
    taus = np.asarray(taus, dtype=float)
    if kappa == 0.0:
        y0 = v * rng.standard_normal(n_traj)
        return np.cos(np.outer(taus, y0)).mean(axis=1)
    out = np.empty(taus.size)
    y = v * rng.standard_normal(n_traj)
    phi = np.zeros(n_traj)
    t_prev = 0.0
    for k, t in enumerate(taus):
        h = t - t_prev
        if h > 0:
            rho = np.exp(-kappa * h)
            var_y = v * v * (1 - rho * rho)
            var_i = v * v / kappa**2 * (2 * kappa * h - 3 + 4 * rho - rho * rho)
            cov = v * v / kappa * (1 - rho) ** 2
            y_new = rho * y + np.sqrt(var_y) * rng.standard_normal(n_traj)
            mean_i = (1 - rho) / kappa * y + cov / var_y * (y_new - rho * y)
            resid_var = max(var_i - cov**2 / var_y, 0.0)
            phi = phi + mean_i + np.sqrt(resid_var) * rng.standard_normal(n_traj)
            y = y_new
            t_prev = t
        out[k] = float(np.cos(phi).mean())
    return out
