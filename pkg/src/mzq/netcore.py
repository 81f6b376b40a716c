"""Transfer-matrix algebra for a four-mode, two-sided microwave network.

The network is described by 4x4 complex transfer matrices acting on mode
vectors. The total matrix of a cascade relates the signals on the right-hand
ports (1 and 3) to the signals on the left-hand ports (4 and 2):

    (a1_out, a1_in, a3_out, a3_in)^T = M . (a4_in, a4_out, a2_in, a2_out)^T

Drives enter on the left side (ports 2 and 4); ports 1 and 3 only emit,
so the port solution imposes a1_in = a3_in = 0 and solves for the four
unknown outgoing amplitudes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Condition-number ceiling above which the port system is treated as singular.
COND_LIMIT = 1e12


class EmptyCascade(ValueError):
    """Raised when a cascade is built from no matrices."""


class NonFinite(ValueError):
    """Raised when a matrix contains NaN or infinite entries."""


class SingularSystem(ArithmeticError):
    """Raised when the port system is singular or numerically unusable."""

    def __init__(self, message: str, frequency: float | None = None):
        if frequency is not None:
            message = f"{message} (at {frequency:.9g} Hz)"
        super().__init__(message)
        self.frequency = frequency


@dataclass(frozen=True)
class PortVector:
    """All eight port amplitudes of one solved drive configuration."""

    a1_out: complex
    a1_in: complex
    a3_out: complex
    a3_in: complex
    a4_in: complex
    a4_out: complex
    a2_in: complex
    a2_out: complex


@dataclass(frozen=True)
class ScatterSolution:
    """Output amplitudes on the four measurement paths.

    s12 and s32 are the port-1 (cross) and port-3 (through) outputs produced
    by the port-2 drive; s34 and s14 are the port-3 (cross) and port-1
    (through) outputs produced by the port-4 drive. Each drive is solved
    independently, so with unit drives the fields are the path S-parameters.
    A port that is not driven contributes zeros.
    """

    s12: complex
    s32: complex
    s34: complex
    s14: complex


def identity() -> np.ndarray:
    """Neutral 4x4 transfer matrix."""
    return np.eye(4, dtype=complex)


def _check_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.shape != (4, 4):
        raise ValueError(f"{name} must be 4x4, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFinite(f"{name} contains non-finite entries")
    return a


def cascade(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Ordered product of transfer matrices, leftmost factor applied last.

    cascade([A, B, C]) returns A @ B @ C, matching the written order of a
    component chain read from the output side to the input side.
    """
    if len(matrices) == 0:
        raise EmptyCascade("cascade requires at least one matrix")
    out = _check_matrix(matrices[0], "matrix 0")
    for k, m in enumerate(matrices[1:], start=1):
        out = out @ _check_matrix(m, f"matrix {k}")
    return out


def port_system_many(totals: np.ndarray) -> np.ndarray:
    """Coefficient matrices of the port equations for a stack of totals.

    For each total M the unknown vector is x = (a1_out, a3_out, a4_out,
    a2_out). Rows 1 and 3 encode the a1_in = a3_in = 0 constraints.
    """
    m = np.asarray(totals, dtype=complex)
    a = np.zeros_like(m)
    a[..., 0, 0] = 1.0
    a[..., 2, 1] = 1.0
    a[..., 0, 2] = -m[..., 0, 1]
    a[..., 0, 3] = -m[..., 0, 3]
    a[..., 1, 2] = m[..., 1, 1]
    a[..., 1, 3] = m[..., 1, 3]
    a[..., 2, 2] = -m[..., 2, 1]
    a[..., 2, 3] = -m[..., 2, 3]
    a[..., 3, 2] = m[..., 3, 1]
    a[..., 3, 3] = m[..., 3, 3]
    return a


def _port_rhs(totals: np.ndarray, a4_in: complex, a2_in: complex) -> np.ndarray:
    m = np.asarray(totals, dtype=complex)
    b = np.empty(m.shape[:-2] + (4,), dtype=complex)
    b[..., 0] = m[..., 0, 0] * a4_in + m[..., 0, 2] * a2_in
    b[..., 1] = -(m[..., 1, 0] * a4_in + m[..., 1, 2] * a2_in)
    b[..., 2] = m[..., 2, 0] * a4_in + m[..., 2, 2] * a2_in
    b[..., 3] = -(m[..., 3, 0] * a4_in + m[..., 3, 2] * a2_in)
    return b


def _cond1_many(a: np.ndarray) -> np.ndarray:
    """1-norm condition estimate of each matrix in a stack."""
    norm = np.abs(a).sum(axis=-2).max(axis=-1)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        return np.full(a.shape[:-2], np.inf)
    inv_norm = np.abs(inv).sum(axis=-2).max(axis=-1)
    cond = norm * inv_norm
    return np.where(np.isfinite(cond), cond, np.inf)


def solve_port_system_many(
    totals: np.ndarray, frequencies: np.ndarray | None = None
) -> np.ndarray:
    """Solve both unit-drive port problems for a stack of total matrices.

    Returns an array of shape (..., 4, 2): column 0 holds (a1_out, a3_out,
    a4_out, a2_out) for a unit port-2 drive, column 1 the same for a unit
    port-4 drive. LU with partial pivoting on the 4x4 system; the 1-norm
    condition estimate gates against near-singular systems.
    """
    m = np.asarray(totals, dtype=complex)
    if not np.isfinite(m).all():
        raise NonFinite("total transfer matrix contains non-finite entries")
    a = port_system_many(m)
    cond = _cond1_many(a)
    bad = cond > COND_LIMIT
    if np.any(bad):
        idx = int(np.argmax(bad))
        freq = None if frequencies is None else float(np.asarray(frequencies).ravel()[idx])
        raise SingularSystem(
            f"port system condition {cond.ravel()[idx]:.3g} exceeds {COND_LIMIT:.0e}",
            frequency=freq,
        )
    b = np.stack(
        [_port_rhs(m, 0.0, 1.0), _port_rhs(m, 1.0, 0.0)],
        axis=-1,
    )
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as err:
        raise SingularSystem(f"port system solve failed: {err}") from err


def solve_outputs(total, a2_in: complex = 1.0, a4_in: complex = 0.0) -> PortVector:
    """Solve the port equations for one joint drive configuration.

    Both drives may be nonzero; the returned PortVector carries the full set
    of amplitudes, with a1_in = a3_in = 0 by construction.
    """
    m = _check_matrix(total, "total")
    if a2_in == 0 and a4_in == 0:
        raise ValueError("at least one drive must be nonzero")
    a = port_system_many(m)
    cond = float(_cond1_many(a))
    if cond > COND_LIMIT:
        raise SingularSystem(f"port system condition {cond:.3g} exceeds {COND_LIMIT:.0e}")
    b = _port_rhs(m, a4_in, a2_in)
    x = np.linalg.solve(a, b)
    return PortVector(
        a1_out=complex(x[0]),
        a1_in=0j,
        a3_out=complex(x[1]),
        a3_in=0j,
        a4_in=complex(a4_in),
        a4_out=complex(x[2]),
        a2_in=complex(a2_in),
        a2_out=complex(x[3]),
    )


def solve_ports(total, a2_in: complex, a4_in: complex) -> ScatterSolution:
    """Output amplitudes on the four measurement paths for the given drives.

    Each nonzero drive is solved on its own (the equations are linear, so the
    joint response is the superposition of the two). Normalizing a field by
    its drive gives the corresponding S-parameter; with unit drives the
    fields are the S-parameters directly.
    """
    m = _check_matrix(total, "total")
    if a2_in == 0 and a4_in == 0:
        raise ValueError("at least one drive must be nonzero")
    s12 = s32 = s34 = s14 = 0j
    if a2_in != 0:
        sol = solve_outputs(m, a2_in=a2_in, a4_in=0.0)
        s12, s32 = sol.a1_out, sol.a3_out
    if a4_in != 0:
        sol = solve_outputs(m, a2_in=0.0, a4_in=a4_in)
        s34, s14 = sol.a3_out, sol.a1_out
    return ScatterSolution(s12=s12, s32=s32, s34=s34, s14=s14)
