"""Cavity coupling: Purcell enhancement, reflection dip, excitation lineshape.

The emitter couples to a photonic-crystal resonance; the observable
consequences kept here are the shortened excited-state lifetime, the
Lorentzian reflection dip of the bare cavity, and the per-pulse
excitation probability as a function of laser detuning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "CavityParams",
    "EffectiveEmitter",
    "EmitterParams",
    "cavity_reflection",
    "effective_lifetime_us",
    "excitation_probability",
    "lifetime_limited_fwhm_mhz",
    "purcell_factor",
]

US_PER_MS = 1000.0


@dataclass(frozen=True)
class CavityParams:
    center_frequency_ghz: float
    quality_factor: float
    mode_volume_cubic_wavelengths: float = 1.0
    refractive_index: float = 3.48
    dip_depth: float = 0.9

    def __post_init__(self) -> None:
        if self.quality_factor <= 0.0:
            raise ValueError("quality factor must be positive")
        if self.mode_volume_cubic_wavelengths <= 0.0:
            raise ValueError("mode volume must be positive")
        if not 0.0 <= self.dip_depth <= 1.0:
            raise ValueError("dip depth must lie in [0, 1]")

    @property
    def linewidth_ghz(self) -> float:
        return self.center_frequency_ghz / self.quality_factor


@dataclass(frozen=True)
class EmitterParams:
    """Bulk emitter properties plus the measured enhancement override.

    When ``enhancement_factor`` is set it wins over the branching-ratio
    formula; the measured lifetime ratio is what experiments report.
    """

    bulk_lifetime_ms: float
    branching_ratio: float = 0.2
    enhancement_factor: float | None = None

    def __post_init__(self) -> None:
        if self.bulk_lifetime_ms <= 0.0:
            raise ValueError("bulk lifetime must be positive")
        if not 0.0 < self.branching_ratio <= 1.0:
            raise ValueError("branching ratio must lie in (0, 1]")
        if self.enhancement_factor is not None and self.enhancement_factor < 1.0:
            raise ValueError("enhancement factor must be >= 1")


def lifetime_limited_fwhm_mhz(lifetime_us: float) -> float:
    """Fourier-limited linewidth ``1 / (2 pi tau)`` for a lifetime in us."""
    return 1.0 / (2.0 * math.pi * lifetime_us)


@dataclass(frozen=True)
class EffectiveEmitter:
    """Cavity-modified emitter as the photon-counting simulator sees it.

    ``frequency_mhz`` is the line centre relative to the scan origin;
    ``fwhm_mhz`` is the measured (environment-broadened) linewidth and
    must not beat the lifetime limit.
    """

    lifetime_us: float
    fwhm_mhz: float
    frequency_mhz: float = 0.0
    saturation_excitation_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.lifetime_us <= 0.0:
            raise ValueError("lifetime must be positive")
        limit = lifetime_limited_fwhm_mhz(self.lifetime_us)
        if self.fwhm_mhz < limit:
            raise ValueError(
                f"linewidth {self.fwhm_mhz:g} MHz is below the lifetime limit {limit:g} MHz"
            )
        if not 0.0 <= self.saturation_excitation_prob <= 1.0:
            raise ValueError("saturation excitation probability must lie in [0, 1]")


def purcell_factor(cavity: CavityParams) -> float:
    """``(3 / 4 pi^2) * Q / V`` with V in cubic wavelengths in the medium."""
    return 3.0 / (4.0 * math.pi**2) * cavity.quality_factor / cavity.mode_volume_cubic_wavelengths


def effective_lifetime_us(emitter: EmitterParams, purcell: float) -> float:
    """Cavity-shortened lifetime in us.

    Uses the measured enhancement override when present, otherwise the
    rate-addition form ``tau_bulk / (1 + branching * F_p)``.
    """
    if purcell < 0.0:
        raise ValueError("Purcell factor must be >= 0")
    if emitter.enhancement_factor is not None:
        return emitter.bulk_lifetime_ms * US_PER_MS / emitter.enhancement_factor
    return emitter.bulk_lifetime_ms * US_PER_MS / (1.0 + emitter.branching_ratio * purcell)


def cavity_reflection(cavity: CavityParams, frequency_ghz: float) -> float:
    """Reflectance of the bare cavity: a Lorentzian dip of width f_c / Q."""
    if not math.isfinite(frequency_ghz):
        raise ValueError("frequency must be finite")
    detuning = 2.0 * (frequency_ghz - cavity.center_frequency_ghz) / cavity.linewidth_ghz
    return 1.0 - cavity.dip_depth / (1.0 + detuning**2)


def excitation_probability(effective: EffectiveEmitter, detuning_mhz: float) -> float:
    """Per-pulse excitation probability at a given laser detuning (MHz)."""
    if not math.isfinite(detuning_mhz):
        raise ValueError("detuning must be finite")
    u = 2.0 * detuning_mhz / effective.fwhm_mhz
    return effective.saturation_excitation_prob / (1.0 + u**2)
