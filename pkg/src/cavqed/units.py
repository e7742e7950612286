"""Unit conversions shared by every layer of the toolkit.

Canonical conventions:

* rates and linewidths are ordinary frequencies in GHz, FWHM for linewidths
  (dynamical generators multiply by 2*pi internally),
* wavelengths in nm, energies in micro-eV, times in ns,
* lifetimes follow tau = 1/(2*pi*gamma_FWHM).

Keep only primitive constants and pure functions here; this module must be
importable from anywhere without side effects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SPEED_OF_LIGHT_NM_GHZ",
    "PLANCK_UEV_PER_GHZ",
    "PhysicalConstants",
    "Detuning",
    "energy_to_frequency",
    "frequency_to_energy",
    "wavelength_to_frequency",
    "frequency_to_wavelength",
    "detuning_to_frequency",
    "frequency_to_detuning",
    "q_factor",
    "lifetime_from_fwhm",
    "fwhm_from_lifetime",
]

# c in nm*GHz (= nm/ns); CODATA exact.
SPEED_OF_LIGHT_NM_GHZ = 2.99792458e8
# h in micro-eV per GHz; CODATA exact (6.62607015e-34 J*s / e).
PLANCK_UEV_PER_GHZ = 4.135667696


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable bundle of the two constants the physics needs."""

    c_nm_GHz: float = SPEED_OF_LIGHT_NM_GHZ
    h_ueV_per_GHz: float = PLANCK_UEV_PER_GHZ


def energy_to_frequency(e_ueV: float) -> float:
    """Photon energy in micro-eV to ordinary frequency in GHz (E = h*nu)."""
    return e_ueV / PLANCK_UEV_PER_GHZ


def frequency_to_energy(f_GHz: float) -> float:
    """Inverse of :func:`energy_to_frequency`."""
    return f_GHz * PLANCK_UEV_PER_GHZ


def wavelength_to_frequency(lambda_nm: float) -> float:
    """Vacuum wavelength in nm to ordinary frequency in GHz."""
    if lambda_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {lambda_nm}")
    return SPEED_OF_LIGHT_NM_GHZ / lambda_nm


def frequency_to_wavelength(f_GHz: float) -> float:
    """Ordinary frequency in GHz to vacuum wavelength in nm."""
    if f_GHz <= 0:
        raise ValueError(f"frequency must be positive, got {f_GHz}")
    return SPEED_OF_LIGHT_NM_GHZ / f_GHz


def detuning_to_frequency(dl_nm: float, lambda_ref_nm: float) -> float:
    """First-order conversion of a wavelength offset to a frequency offset.

    d_nu = c * d_lambda / lambda_ref**2.  Positive for a red wavelength
    offset, i.e. the sign convention where both the wavelength and the
    frequency detuning are positive when the cavity sits blue of the exciton.
    """
    if lambda_ref_nm <= 0:
        raise ValueError(f"reference wavelength must be positive, got {lambda_ref_nm}")
    return SPEED_OF_LIGHT_NM_GHZ * dl_nm / lambda_ref_nm**2


def frequency_to_detuning(dw_GHz: float, lambda_ref_nm: float) -> float:
    """Inverse of :func:`detuning_to_frequency` at the same reference."""
    if lambda_ref_nm <= 0:
        raise ValueError(f"reference wavelength must be positive, got {lambda_ref_nm}")
    return dw_GHz * lambda_ref_nm**2 / SPEED_OF_LIGHT_NM_GHZ


def q_factor(lambda_nm: float, fwhm_nm: float) -> float:
    """Quality factor lambda / delta-lambda of a resonance."""
    if lambda_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {lambda_nm}")
    if fwhm_nm <= 0:
        raise ValueError(f"linewidth must be positive, got {fwhm_nm}")
    return lambda_nm / fwhm_nm


def lifetime_from_fwhm(gamma_GHz: float) -> float:
    """Lifetime in ns of a state whose FWHM linewidth is ``gamma_GHz``."""
    if gamma_GHz <= 0:
        raise ValueError(f"rate must be positive, got {gamma_GHz}")
    return 1.0 / (2.0 * math.pi * gamma_GHz)


def fwhm_from_lifetime(tau_ns: float) -> float:
    """FWHM linewidth in GHz of a state with lifetime ``tau_ns``."""
    if tau_ns <= 0:
        raise ValueError(f"lifetime must be positive, got {tau_ns}")
    return 1.0 / (2.0 * math.pi * tau_ns)


@dataclass(frozen=True)
class Detuning:
    """Exciton-cavity spectral offset, kept consistent in both unit systems.

    ``dl_nm`` is the wavelength detuning lambda_x - lambda_m and ``dw_GHz``
    the frequency detuning omega_m - omega_x; both are positive when the
    cavity is blue of the exciton.  Construct through :meth:`from_nm` or
    :meth:`from_GHz` so the two stay consistent via the first-order relation.
    """

    dl_nm: float
    dw_GHz: float
    lambda_ref_nm: float

    def __post_init__(self):
        if self.lambda_ref_nm <= 0:
            raise ValueError("reference wavelength must be positive")
        expected = detuning_to_frequency(self.dl_nm, self.lambda_ref_nm)
        scale = max(abs(expected), abs(self.dw_GHz), 1e-12)
        if abs(expected - self.dw_GHz) > 1e-6 * scale:
            raise ValueError(
                f"inconsistent detuning: {self.dl_nm} nm at {self.lambda_ref_nm} nm "
                f"is {expected} GHz, not {self.dw_GHz} GHz"
            )

    @classmethod
    def from_nm(cls, dl_nm: float, lambda_ref_nm: float) -> "Detuning":
        return cls(dl_nm, detuning_to_frequency(dl_nm, lambda_ref_nm), lambda_ref_nm)

    @classmethod
    def from_GHz(cls, dw_GHz: float, lambda_ref_nm: float) -> "Detuning":
        return cls(frequency_to_detuning(dw_GHz, lambda_ref_nm), dw_GHz, lambda_ref_nm)

    @classmethod
    def zero(cls, lambda_ref_nm: float) -> "Detuning":
        return cls(0.0, 0.0, lambda_ref_nm)
