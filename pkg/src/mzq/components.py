"""Circuit components and spectrum generation for the interferometer model.

A circuit is a five-element chain

    splitter . line . scatterer . line . splitter

where the splitter is a 50:50 quadrature element (ideal or a single-section
branch-line hybrid), the lines carry per-segment phase delay and attenuation,
and the scatterer is a driven two-level system embedded in one arm. Mode
components (0, 1) of the internal four-vector belong to arm a, components
(2, 3) to arm b.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import netcore
from .netcore import SingularSystem

# Canonical path order used everywhere traces are stored or serialized.
PATHS = ("s12", "s32", "s34", "s14")
CROSS_PATHS = ("s12", "s34")
THROUGH_PATHS = ("s32", "s14")

# Below this transmission magnitude the scatterer's transfer block is
# numerically meaningless (entries scale as 1/t).
T_DEGENERATE = 1e-9

CSV_HEADER = ("freq_hz", "re", "im", "path", "label")


class DegenerateScatterer(ArithmeticError):
    """Raised when the two-level scatterer is fully reflecting (|t| ~ 0)."""

    def __init__(self, message: str, frequency: float | None = None):
        if frequency is not None:
            message = f"{message} (at {frequency:.9g} Hz)"
        super().__init__(message)
        self.frequency = frequency


class TraceParseError(ValueError):
    """Raised on malformed trace files, carrying the offending line number."""


def _require_finite(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class LineParams:
    """Per-segment propagation parameters of the four internal line segments.

    phase_rate: seconds per segment; the accumulated phase is phase_rate * omega.
    attenuation: dimensionless damping exponent r >= 0 per segment; the segment
        amplitude factor is exp(-r + 1j * phase_rate * omega).

    Segments (0, 1) sit in arm a, segments (2, 3) in arm b.
    """

    phase_rate: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    attenuation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("phase_rate", "attenuation"):
            vals = getattr(self, name)
            if len(vals) != 4:
                raise ValueError(f"{name} needs 4 entries, got {len(vals)}")
            object.__setattr__(self, name, tuple(_require_finite(v, name) for v in vals))
        if any(r < 0 for r in self.attenuation):
            raise ValueError("attenuation entries must be >= 0")


@dataclass(frozen=True)
class BeamSplitterModel:
    """Splitter model: 'ideal' (frequency independent) or 'branchline'.

    A branch-line splitter is a single-section quadrature hybrid whose arms
    are a quarter wavelength long at center_frequency (rad/s); it matches the
    ideal splitter exactly at that frequency and develops imbalance and
    leakage away from it.
    """

    kind: str = "ideal"
    center_frequency: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ideal", "branchline"):
            raise ValueError(f"unknown splitter kind {self.kind!r}")
        if self.kind == "branchline" and not self.center_frequency > 0:
            raise ValueError("branchline splitter needs center_frequency > 0")


@dataclass(frozen=True)
class QubitScatterer:
    """Two-level scatterer parameters, angular frequencies in rad/s.

    omega01: transition frequency. gamma1: energy relaxation rate.
    gamma_phi: pure dephasing rate. r0: maximum reflection amplitude in
    (0, 1]. rabi: drive amplitude entering the saturation term.
    """

    omega01: float
    gamma1: float
    gamma_phi: float
    r0: float
    rabi: float = 0.0

    def __post_init__(self):
        _require_finite(self.omega01, "omega01")
        _require_finite(self.gamma1, "gamma1")
        _require_finite(self.gamma_phi, "gamma_phi")
        _require_finite(self.r0, "r0")
        _require_finite(self.rabi, "rabi")
        if self.omega01 <= 0:
            raise ValueError("omega01 must be > 0")
        if self.gamma1 < 0 or self.gamma_phi < 0:
            raise ValueError("rates must be >= 0")
        if self.gamma2 <= 0:
            raise ValueError("gamma1/2 + gamma_phi must be > 0")
        if not 0 < self.r0 <= 1:
            raise ValueError("r0 must be in (0, 1]")
        if self.rabi < 0:
            raise ValueError("rabi must be >= 0")
        if self.rabi > 0 and self.gamma1 == 0:
            raise ValueError("saturation term needs gamma1 > 0 when rabi > 0")

    @property
    def gamma2(self) -> float:
        """Total decoherence rate gamma1/2 + gamma_phi."""
        return self.gamma1 / 2 + self.gamma_phi


@dataclass(frozen=True)
class CircuitSpec:
    """Complete description of one interferometer configuration."""

    splitter: BeamSplitterModel
    lines: LineParams
    qubit: QubitScatterer | None = None
    qubit_arm: str = "a"
    cal_scale: complex = 1 + 0j
    cal_delay: float = 0.0

    def __post_init__(self):
        if self.qubit_arm not in ("a", "b"):
            raise ValueError("qubit_arm must be 'a' or 'b'")
        scale = complex(self.cal_scale)
        if not (math.isfinite(scale.real) and math.isfinite(scale.imag)) or scale == 0:
            raise ValueError("cal_scale must be finite and nonzero")
        object.__setattr__(self, "cal_scale", scale)
        _require_finite(self.cal_delay, "cal_delay")


@dataclass
class SpectrumTrace:
    """Complex transmission samples per measurement path.

    freqs: strictly increasing frequency grid in Hz.
    values: mapping of path name (subset of PATHS) to complex arrays.
    noise_sigma: per-quadrature standard deviation added at synthesis time.
    label: free-text tag. drive_port and flux_phi0 record how the data
    was taken.
    """

    freqs: np.ndarray
    values: dict[str, np.ndarray]
    noise_sigma: float = 0.0
    label: str = ""
    drive_port: int | None = None
    flux_phi0: float | None = None

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("freqs must be a non-empty 1-D array")
        if not np.isfinite(f).all():
            raise ValueError("freqs must be finite")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("freqs must be strictly increasing")
        self.freqs = f
        vals = {}
        for path, arr in self.values.items():
            if path not in PATHS:
                raise ValueError(f"unknown path {path!r}")
            a = np.asarray(arr, dtype=complex)
            if a.shape != f.shape:
                raise ValueError(f"path {path!r} has {a.shape}, expected {f.shape}")
            vals[path] = a
        if not vals:
            raise ValueError("trace needs at least one path")
        self.values = vals
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError("noise_sigma must be finite and >= 0")

    def cross_path(self) -> str:
        """Preferred cross path: the one matching drive_port when known."""
        preferred = "s34" if self.drive_port == 4 else "s12"
        if preferred in self.values:
            return preferred
        for p in CROSS_PATHS:
            if p in self.values:
                return p
        raise ValueError("trace has no cross path (s12 or s34)")


# ---------------------------------------------------------------------------
# component factories
# ---------------------------------------------------------------------------

_IDEAL_BS = np.array(
    [
        [-1j, 0, -1, 0],
        [0, 1j, 0, -1],
        [-1, 0, -1j, 0],
        [0, -1, 0, 1j],
    ],
    dtype=complex,
) / math.sqrt(2)


def tl_stack(params: LineParams, omegas: np.ndarray) -> np.ndarray:
    """Diagonal line matrices exp(-r_k + i*phase_rate_k*omega), shape (N,4,4)."""
    w = np.asarray(omegas, dtype=float).reshape(-1)
    rate = np.asarray(params.phase_rate)
    att = np.asarray(params.attenuation)
    diag = np.exp(-att[None, :] + 1j * rate[None, :] * w[:, None])
    out = np.zeros((w.size, 4, 4), dtype=complex)
    idx = np.arange(4)
    out[:, idx, idx] = diag
    return out


def _branchline_coefficients(theta: np.ndarray):
    """Even/odd-mode reflection and transmission of a branch-line hybrid.

    Normalized impedances: series arms 1/sqrt(2), shunt arms 1, ports 1.
    theta is the electrical length of every arm (pi/2 at the design point).
    """
    za = 1 / math.sqrt(2)
    half = np.tan(theta / 2)
    results = []
    for stub_y in (1j * half, -1j / half):
        # shunt stub, quarter arm, shunt stub; the half circuit is symmetric
        a = np.cos(theta) + 1j * za * np.sin(theta) * stub_y
        b = 1j * za * np.sin(theta)
        c = 1j * np.sin(theta) / za + 2 * np.cos(theta) * stub_y + b * stub_y**2
        den = 2 * a + b + c
        results.append(((b - c) / den, 2 / den))
    (gamma_e, t_e), (gamma_o, t_o) = results
    refl = (gamma_e + gamma_o) / 2
    iso = (gamma_e - gamma_o) / 2
    thru = (t_e + t_o) / 2
    cross = (t_e - t_o) / 2
    return refl, iso, thru, cross


def bs_stack(model: BeamSplitterModel, omegas: np.ndarray) -> np.ndarray:
    """Splitter transfer matrices for each frequency, shape (N,4,4)."""
    w = np.asarray(omegas, dtype=float).reshape(-1)
    if np.any(w <= 0):
        raise ValueError("omega must be > 0")
    if model.kind == "ideal":
        return np.broadcast_to(_IDEAL_BS, (w.size, 4, 4)).copy()

    theta = (math.pi / 2) * w / model.center_frequency
    refl, iso, thru, cross = _branchline_coefficients(theta)
    delta = thru**2 - cross**2
    if np.any(np.abs(delta) < 1e-12):
        idx = int(np.argmin(np.abs(delta)))
        raise SingularSystem(
            "branch-line splitter is not invertible into transfer form",
            frequency=w[idx] / (2 * math.pi),
        )
    au = np.empty((w.size, 4), dtype=complex)
    av = np.empty_like(au)
    au[:, 0] = (cross * iso - thru * refl) / delta
    au[:, 1] = thru / delta
    au[:, 2] = (cross * refl - thru * iso) / delta
    au[:, 3] = -cross / delta
    av[:, 0] = au[:, 2]
    av[:, 1] = au[:, 3]
    av[:, 2] = au[:, 0]
    av[:, 3] = au[:, 1]

    out = np.empty((w.size, 4, 4), dtype=complex)
    out[:, 1, :] = au
    out[:, 3, :] = av
    for col in range(4):
        out[:, 0, col] = refl * au[:, col] + iso * av[:, col]
        out[:, 2, col] = iso * au[:, col] + refl * av[:, col]
    out[:, 0, 0] += thru
    out[:, 0, 2] += cross
    out[:, 2, 0] += cross
    out[:, 2, 2] += thru
    return out


def qubit_rt_many(q: QubitScatterer, omegas: np.ndarray):
    """Reflection and transmission amplitudes of the scatterer, vectorized."""
    w = np.asarray(omegas, dtype=float)
    g2 = q.gamma2
    detune = (w - q.omega01) / g2
    sat = (q.rabi**2 / (q.gamma1 * g2)) if q.rabi > 0 else 0.0
    r = q.r0 * (1 - 1j * detune) / (1 + detune**2 + sat)
    return r, 1 - r


def qubit_stack(q: QubitScatterer, omegas: np.ndarray, arm: str = "a") -> np.ndarray:
    """Scatterer transfer matrices, shape (N,4,4); identity on the empty arm.

    The occupied arm carries the standard two-port transfer block
    (1/t) * [[t^2 - r^2, r], [-r, 1]].
    """
    w = np.asarray(omegas, dtype=float).reshape(-1)
    r, t = qubit_rt_many(q, w)
    small = np.abs(t) < T_DEGENERATE
    if np.any(small):
        idx = int(np.argmax(small))
        raise DegenerateScatterer(
            f"|t| = {abs(t[idx]):.3g} below {T_DEGENERATE:.0e}",
            frequency=w[idx] / (2 * math.pi),
        )
    out = np.zeros((w.size, 4, 4), dtype=complex)
    idx = np.arange(4)
    out[:, idx, idx] = 1.0
    lo = 0 if arm == "a" else 2
    out[:, lo, lo] = (t**2 - r**2) / t
    out[:, lo, lo + 1] = r / t
    out[:, lo + 1, lo] = -r / t
    out[:, lo + 1, lo + 1] = 1 / t
    return out


def tl_matrix(params: LineParams, omega: float) -> np.ndarray:
    """Transfer matrix of the four line segments at one frequency (rad/s)."""
    if not omega > 0:
        raise ValueError("omega must be > 0")
    return tl_stack(params, np.array([omega]))[0]


def bs_matrix(model: BeamSplitterModel, omega: float) -> np.ndarray:
    """Transfer matrix of the splitter at one frequency (rad/s)."""
    if not omega > 0:
        raise ValueError("omega must be > 0")
    return bs_stack(model, np.array([omega]))[0]


def qubit_rt(q: QubitScatterer, omega: float) -> tuple[complex, complex]:
    """Scalar (r, t) of the scatterer; r + t = 1 holds exactly."""
    r, t = qubit_rt_many(q, np.array([float(omega)]))
    return complex(r[0]), complex(t[0])


def qubit_matrix(q: QubitScatterer, omega: float, arm: str = "a") -> np.ndarray:
    """Transfer matrix of the scatterer at one frequency (rad/s)."""
    if arm not in ("a", "b"):
        raise ValueError("arm must be 'a' or 'b'")
    return qubit_stack(q, np.array([float(omega)]), arm)[0]


def total_matrix_stack(spec: CircuitSpec, omegas: np.ndarray) -> np.ndarray:
    """Total transfer matrix splitter.line.scatterer.line.splitter per frequency."""
    w = np.asarray(omegas, dtype=float).reshape(-1)
    bs = bs_stack(spec.splitter, w)
    tl = tl_stack(spec.lines, w)
    if spec.qubit is not None:
        qm = qubit_stack(spec.qubit, w, spec.qubit_arm)
        inner = tl @ qm @ tl
    else:
        inner = tl @ tl
    return bs @ inner @ bs


def total_matrix(spec: CircuitSpec, omega: float) -> np.ndarray:
    """Total transfer matrix at one frequency (rad/s)."""
    return total_matrix_stack(spec, np.array([float(omega)]))[0]


# ---------------------------------------------------------------------------
# spectrum generation
# ---------------------------------------------------------------------------

def sweep(spec: CircuitSpec, freqs, drive_port: int = 2, label: str = "") -> SpectrumTrace:
    """Noiseless transmission spectrum of the circuit.

    Solves the port equations at every frequency for unit drives on both
    input ports, so the trace carries all four path amplitudes; drive_port
    records which port is the primary probe (it selects the default path for
    classification and fitting downstream).

    Args:
        spec: circuit description.
        freqs: strictly increasing frequency grid in Hz.
        drive_port: 2 or 4.
        label: free-text tag stored on the trace.

    Raises:
        DegenerateScatterer, SingularSystem: degenerate model, with the
            offending frequency attached.
    """
    if drive_port not in (2, 4):
        raise ValueError("drive_port must be 2 or 4")
    f = np.asarray(freqs, dtype=float).reshape(-1)
    if f.size == 0 or (f.size > 1 and not np.all(np.diff(f) > 0)):
        raise ValueError("freqs must be non-empty and strictly increasing")
    if np.any(f <= 0):
        raise ValueError("freqs must be positive")
    w = 2 * math.pi * f
    totals = total_matrix_stack(spec, w)
    x = netcore.solve_port_system_many(totals, frequencies=f)
    cal = spec.cal_scale * np.exp(-1j * w * spec.cal_delay)
    values = {
        "s12": x[:, 0, 0] * cal,
        "s32": x[:, 1, 0] * cal,
        "s34": x[:, 1, 1] * cal,
        "s14": x[:, 0, 1] * cal,
    }
    return SpectrumTrace(freqs=f, values=values, noise_sigma=0.0, label=label,
                         drive_port=drive_port)


def synthesize(spec: CircuitSpec, freqs, drive_port: int = 2, noise_sigma: float = 0.0,
               seed: int = 0, label: str = "") -> SpectrumTrace:
    """Sweep plus additive complex Gaussian noise, deterministic under seed.

    noise_sigma is the standard deviation applied independently to the real
    and imaginary part of every sample. A fresh generator is created per
    call, so identical arguments give bit-identical traces.
    """
    if not math.isfinite(noise_sigma) or noise_sigma < 0:
        raise ValueError("noise_sigma must be finite and >= 0")
    trace = sweep(spec, freqs, drive_port=drive_port, label=label)
    rng = np.random.default_rng(seed)
    n = trace.freqs.size
    for path in PATHS:
        noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        trace.values[path] = trace.values[path] + noise_sigma * noise
    trace.noise_sigma = noise_sigma
    return trace


def make_interferometer(center_hz: float = 5.746e9, qubit: QubitScatterer | None = None,
                        qubit_arm: str = "a", splitter_kind: str = "ideal") -> CircuitSpec:
    """Convenience circuit with full cross transmission at center_hz.

    With ideal splitters the arm opposite the scatterer is longer by one
    fringe period (delay 1/(2*center_hz) per segment) and the scatterer arm
    is attenuated, which reproduces the measured progression of line shapes:
    asymmetric peak-dip below center, symmetric dip near center, mirrored
    asymmetry above. With branch-line splitters the arms are left equal and
    the hybrids supply the frequency dependence.
    """
    if splitter_kind == "ideal":
        splitter = BeamSplitterModel(kind="ideal")
        d = 1 / (2 * center_hz)
        if qubit_arm == "a":
            lines = LineParams(phase_rate=(0.0, 0.0, d, d),
                               attenuation=(0.35, 0.35, 0.0, 0.0))
        else:
            lines = LineParams(phase_rate=(d, d, 0.0, 0.0),
                               attenuation=(0.0, 0.0, 0.35, 0.35))
    else:
        splitter = BeamSplitterModel(kind="branchline",
                                     center_frequency=2 * math.pi * center_hz)
        lines = LineParams()
    return CircuitSpec(splitter=splitter, lines=lines, qubit=qubit, qubit_arm=qubit_arm)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_to_csv(trace: SpectrumTrace) -> str:
    """Render a trace as CSV text with columns freq_hz,re,im,path,label.

    Floats carry 17 significant digits, enough to round-trip float64 exactly.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for path in PATHS:
        if path not in trace.values:
            continue
        vals = trace.values[path]
        for f, v in zip(trace.freqs, vals):
            writer.writerow([_fmt(f), _fmt(v.real), _fmt(v.imag), path, trace.label])
    return buf.getvalue()


def trace_from_csv(text: str) -> SpectrumTrace:
    """Parse CSV produced by trace_to_csv; errors carry the 1-based line number."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceParseError("line 1: empty trace file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise TraceParseError(f"line 1: expected header {','.join(CSV_HEADER)}")
    freqs: dict[str, list[float]] = {}
    vals: dict[str, list[complex]] = {}
    label = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise TraceParseError(f"line {lineno}: expected 5 fields, got {len(row)}")
        try:
            f = float(row[0])
            re_part = float(row[1])
            im_part = float(row[2])
        except ValueError as err:
            raise TraceParseError(f"line {lineno}: {err}") from None
        path = row[3]
        if path not in PATHS:
            raise TraceParseError(f"line {lineno}: unknown path {path!r}")
        if label is None:
            label = row[4]
        elif row[4] != label:
            raise TraceParseError(f"line {lineno}: inconsistent label {row[4]!r}")
        freqs.setdefault(path, []).append(f)
        vals.setdefault(path, []).append(complex(re_part, im_part))
    if not freqs:
        raise TraceParseError("line 2: no data rows")
    grids = [np.asarray(g) for g in freqs.values()]
    for g in grids[1:]:
        if g.shape != grids[0].shape or not np.array_equal(g, grids[0]):
            raise TraceParseError("paths disagree on the frequency grid")
    return SpectrumTrace(
        freqs=grids[0],
        values={p: np.asarray(v) for p, v in vals.items()},
        label=label or "",
    )


def write_trace_csv(path: str | Path, trace: SpectrumTrace) -> None:
    Path(path).write_text(trace_to_csv(trace))


def read_trace_csv(path: str | Path) -> SpectrumTrace:
    return trace_from_csv(Path(path).read_text())


def trace_to_json(trace: SpectrumTrace) -> str:
    """JSON mirror of the CSV format, including synthesis metadata."""
    doc = {
        "label": trace.label,
        "noise_sigma": trace.noise_sigma,
        "drive_port": trace.drive_port,
        "flux_phi0": trace.flux_phi0,
        "freq_hz": [float(f) for f in trace.freqs],
        "paths": {
            p: {"re": [float(v.real) for v in trace.values[p]],
                "im": [float(v.imag) for v in trace.values[p]]}
            for p in PATHS if p in trace.values
        },
    }
    return json.dumps(doc, indent=1)


def trace_from_json(text: str) -> SpectrumTrace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise TraceParseError(f"line {err.lineno}: {err.msg}") from None
    try:
        freqs = np.asarray(doc["freq_hz"], dtype=float)
        values = {
            p: np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
            for p, d in doc["paths"].items()
        }
        return SpectrumTrace(
            freqs=freqs,
            values=values,
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            label=str(doc.get("label", "")),
            drive_port=doc.get("drive_port"),
            flux_phi0=doc.get("flux_phi0"),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise TraceParseError(f"bad trace document: {err}") from None


def write_trace_json(path: str | Path, trace: SpectrumTrace) -> None:
    Path(path).write_text(trace_to_json(trace))


def read_trace_json(path: str | Path) -> SpectrumTrace:
    return trace_from_json(Path(path).read_text())


def read_trace(path: str | Path) -> SpectrumTrace:
    """Load a trace from .csv or .json by extension."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        return read_trace_json(p)
    return read_trace_csv(p)


def with_qubit(spec: CircuitSpec, qubit: QubitScatterer | None) -> CircuitSpec:
    """Copy of spec with the scatterer replaced."""
    return replace(spec, qubit=qubit)
