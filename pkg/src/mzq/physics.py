"""Transmon spectrum, relaxation and dephasing models, and flux noise.

Angular frequencies and rates are rad/s throughout; junction and charging
energies are plain Hz (energy divided by the Planck constant); flux is in
units of the flux quantum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.optimize import brentq

HBAR = constants.hbar
SPEED_OF_LIGHT = constants.c
VACUUM_PERMITTIVITY = constants.epsilon_0


class DegenerateFlux(ValueError):
    """Raised where the junction energy vanishes (half-integer flux)."""


class QuasiStaticLimit(ValueError):
    """Raised when the zero-frequency spectral value is a delta function."""


@dataclass(frozen=True)
class TransmonParams:
    """Symmetric-junction transmon energies in Hz.

    ej_max: maximum Josephson energy. ec: charging energy. The transmon
    regime ej_max/ec > 10 is enforced.
    """

    ej_max: float
    ec: float

    def __post_init__(self):
        if not (math.isfinite(self.ej_max) and math.isfinite(self.ec)):
            raise ValueError("energies must be finite")
        if self.ej_max <= 0 or self.ec <= 0:
            raise ValueError("energies must be > 0")
        if self.ej_max / self.ec <= 10:
            raise ValueError("transmon regime requires ej_max/ec > 10")


@dataclass(frozen=True)
class BathModel:
    """Relaxation model: Ohmic background plus a parasitic Lorentzian mode.

    gamma1(omega) = alpha*omega
                    + lorentz_height * hw^2 / ((omega - lorentz_center)^2 + hw^2)

    with hw = lorentz_fwhm/2. alpha is dimensionless; the Lorentzian is
    parameterized by its peak height (rad/s), center and FWHM (rad/s).
    """

    alpha: float
    lorentz_center: float = 0.0
    lorentz_fwhm: float = 0.0
    lorentz_height: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "lorentz_center", "lorentz_fwhm", "lorentz_height"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
        if self.lorentz_height > 0 and self.lorentz_fwhm <= 0:
            raise ValueError("lorentz_fwhm must be > 0 when the peak is present")


@dataclass(frozen=True)
class CouplingParams:
    """Dipole coupling of the scatterer to the line continuum.

    d_tilde: effective dipole moment in A*s. Medium constants default to
    vacuum. g0 is the derived coupling prefactor sqrt(d_tilde^2/(hbar*eps0)).
    """

    d_tilde: float
    c: float = SPEED_OF_LIGHT
    epsilon0: float = VACUUM_PERMITTIVITY

    def __post_init__(self):
        for name in ("d_tilde", "c", "epsilon0"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be finite and > 0")

    @property
    def g0(self) -> float:
        return math.sqrt(self.d_tilde**2 / (HBAR * self.epsilon0))


@dataclass(frozen=True)
class OUNoise:
    """Ornstein-Uhlenbeck flux noise acting on the transition frequency.

    The flux deviation has autocorrelation sigma^2 * exp(-kappa*|tau|) and
    shifts the transition by slope * delta_flux. sigma is in flux quanta,
    kappa in rad/s, slope in rad/s per flux quantum.
    """

    sigma: float
    kappa: float
    slope: float

    def __post_init__(self):
        for name in ("sigma", "kappa", "slope"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")

    @property
    def v(self) -> float:
        """Frequency-deviation scale slope * sigma in rad/s."""
        return self.slope * self.sigma


# ---------------------------------------------------------------------------
# transmon spectrum
# ---------------------------------------------------------------------------

def omega01(params: TransmonParams, flux: float) -> float:
    """Transition frequency 2*pi*(sqrt(8*ej_max*|cos(pi*flux)|*ec) - ec).

    flux is in flux quanta. Raises DegenerateFlux where the junction energy
    is too small for the transition to exist (near half-integer flux).
    """
    cosine = abs(math.cos(math.pi * flux))
    f01 = math.sqrt(8 * params.ej_max * cosine * params.ec) - params.ec
    if f01 <= 0:
        raise DegenerateFlux(f"junction energy vanishes at flux {flux!r}")
    return 2 * math.pi * f01


def domega01_dflux(params: TransmonParams, flux: float) -> float:
    """Analytic flux derivative of omega01 in rad/s per flux quantum."""
    theta = math.pi * flux
    cosine = math.cos(theta)
    if abs(cosine) < 1e-12:
        raise DegenerateFlux(f"derivative diverges at flux {flux!r}")
    omega01(params, flux)  # reuse the existence check
    return (
        -math.pi**2
        * math.sqrt(8 * params.ej_max * params.ec)
        * math.copysign(1.0, cosine)
        * math.sin(theta)
        / math.sqrt(abs(cosine))
    )


def flux_for_omega01(params: TransmonParams, target: float) -> float:
    """Flux in [0, 1/2) at which omega01 equals target (rad/s)."""
    cosine = (target / (2 * math.pi) + params.ec) ** 2 / (8 * params.ej_max * params.ec)
    if not 0 < cosine <= 1:
        raise ValueError("target frequency is outside the attainable band")
    return math.acos(cosine) / math.pi


# ---------------------------------------------------------------------------
# relaxation channel
# ---------------------------------------------------------------------------

def gamma1_model(bath: BathModel, omega) -> np.ndarray | float:
    """Relaxation rate of the Ohmic-plus-Lorentzian bath at omega (rad/s)."""
    w = np.asarray(omega, dtype=float)
    out = bath.alpha * w
    if bath.lorentz_height > 0:
        hw = bath.lorentz_fwhm / 2
        out = out + bath.lorentz_height * hw**2 / ((w - bath.lorentz_center) ** 2 + hw**2)
    return out if out.ndim else float(out)


def alpha_from_dipole(coupling: CouplingParams) -> float:
    """Dimensionless Ohmic coupling d_tilde^2/(hbar*c*epsilon0)."""
    return coupling.d_tilde**2 / (HBAR * coupling.c * coupling.epsilon0)


def alpha_res(g: float, omega_res: float) -> float:
    """Equivalent Ohmic coupling pi*(g/omega_res)^2 of a single mode.

    g and omega_res are rad/s; a precharacterized resonator coupling thus
    cross-checks the dipole route to alpha.
    """
    if not (g > 0 and omega_res > 0):
        raise ValueError("g and omega_res must be > 0")
    return math.pi * (g / omega_res) ** 2


def kondo_alpha(alpha: float) -> float:
    """Kondo-convention coupling alpha/(2*pi)."""
    if not alpha >= 0:
        raise ValueError("alpha must be >= 0")
    return alpha / (2 * math.pi)


def coupling_gk(coupling: CouplingParams, omega_k, length: float) -> np.ndarray | float:
    """Mode coupling g0*sqrt(omega_k/(2*length)) for a line of given length.

    omega_k is the mode frequency (rad/s), length in meters. Summing
    2*pi*g_k^2 over modes spaced by pi*c/length reproduces the Ohmic
    spectral density alpha*omega in the continuum limit.
    """
    w = np.asarray(omega_k, dtype=float)
    if np.any(w <= 0) or not length > 0:
        raise ValueError("omega_k and length must be > 0")
    out = coupling.g0 * np.sqrt(w / (2 * length))
    return out if out.ndim else float(out)


def spectral_density_ohmic(beta: float, omega, cutoff: float = math.inf) -> np.ndarray | float:
    """Ohmic spectral density beta*omega*exp(-omega/cutoff)."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if not cutoff > 0:
        raise ValueError("cutoff must be > 0")
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be >= 0")
    out = beta * w * (np.exp(-w / cutoff) if math.isfinite(cutoff) else 1.0)
    return out if out.ndim else float(out)


def dressed_frequencies(omega_res: float, omega_q: float, g: float) -> tuple[float, float]:
    """Normal-mode frequencies of a resonator-qubit pair (rad/s each).

    (omega_res + omega_q)/2 +- sqrt(g^2 + (omega_res - omega_q)^2/4); on
    resonance the splitting is 2g.
    """
    if not (omega_res > 0 and omega_q > 0 and g >= 0):
        raise ValueError("frequencies must be > 0 and g >= 0")
    mean = (omega_res + omega_q) / 2
    split = math.sqrt(g**2 + (omega_res - omega_q) ** 2 / 4)
    return mean - split, mean + split


# ---------------------------------------------------------------------------
# dephasing channel
# ---------------------------------------------------------------------------

def ou_spectrum(noise: OUNoise, omega) -> np.ndarray | float:
    """Frequency-noise spectral density slope^2*sigma^2*2*kappa/(kappa^2+omega^2).

    Integrates to 2*pi*(slope*sigma)^2 over the real line. In the fast limit
    kappa >> |omega| it flattens to 2*v^2/kappa. kappa = 0 is the quasi-static
    limit: the value is a delta function at omega = 0, so that point raises
    QuasiStaticLimit (elsewhere the density is zero).
    """
    w = np.asarray(omega, dtype=float)
    if noise.kappa == 0:
        if np.any(w == 0):
            raise QuasiStaticLimit("spectrum at omega = 0 is a delta function")
        out = np.zeros_like(w)
        return out if out.ndim else 0.0
    out = noise.v**2 * 2 * noise.kappa / (noise.kappa**2 + w**2)
    return out if out.ndim else float(out)


def _phase_variance_kernel(kappa: float, tau) -> np.ndarray:
    """Double time integral (exp(-kappa*tau) - 1 + kappa*tau)/kappa^2.

    Equals tau^2/2 in the kappa -> 0 limit; evaluated through a series for
    small kappa*tau to avoid cancellation.
    """
    t = np.asarray(tau, dtype=float)
    if kappa == 0:
        return t**2 / 2
    x = kappa * t
    series = t**2 * (0.5 - x / 6 + x**2 / 24)
    exact = (np.expm1(-x) + x) / kappa**2
    return np.where(x < 1e-4, series, exact)


def ou_coherence(noise: OUNoise, tau) -> np.ndarray | float:
    """Dephasing envelope exp(-v^2*(exp(-k*t) - 1 + k*t)/k^2) of OU noise.

    Exact for Gaussian noise (second cumulant). At kappa = 0 it reduces to
    the Gaussian decay exp(-v^2*tau^2/2).
    """
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be >= 0")
    out = np.exp(-noise.v**2 * _phase_variance_kernel(noise.kappa, t))
    return out if out.ndim else float(out)


def gamma_phi_model(noise: OUNoise) -> float:
    """Dephasing rate: inverse of the 1/e point of the coherence envelope.

    Limits: kappa = 0 gives v/sqrt(2); kappa >> v gives the motionally
    narrowed rate v^2/kappa.
    """
    v = noise.v
    if v == 0:
        return 0.0
    if noise.kappa == 0:
        return v / math.sqrt(2)

    def decay_deficit(t: float) -> float:
        return v**2 * float(_phase_variance_kernel(noise.kappa, np.asarray(t))) - 1.0

    hi = math.sqrt(2) / v
    while decay_deficit(hi) < 0:
        hi *= 2
    t_phi = brentq(decay_deficit, 0.0, hi, xtol=1e-300, rtol=1e-14)
    return 1.0 / t_phi
