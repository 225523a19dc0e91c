"""Electric-field response of individual emitters.

The full quadratic model folds the dipole-moment and polarizability
differences through a local-field correction tensor; day-to-day work
uses the empirical scalar law ``shift = s * E_parallel`` with a signed
coefficient per ion, plus a linear line-broadening term. Crystal-site
degeneracy and the two-ion resonance condition live here too.

Units: fields in V/cm, coefficients in kHz/(V/cm), shifts and widths in
MHz.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .electrostatics import FieldVector

__all__ = [
    "IonModel",
    "NoResonanceError",
    "OrientationClass",
    "ShiftResult",
    "StarkModelError",
    "StarkTensors",
    "VoltageOutOfRangeError",
    "orientation_shifts",
    "resonance_voltage",
    "stark_shift_empirical",
    "stark_shift_full",
]

KHZ_PER_MHZ = 1000.0
V_PER_CM_PER_KV_PER_CM = 1000.0


class StarkModelError(ValueError):
    pass


class NoResonanceError(StarkModelError):
    """Equal Stark coefficients cannot bridge a frequency difference."""


class VoltageOutOfRangeError(StarkModelError):
    def __init__(self, required_voltage_v: float, v_max: float):
        self.required_voltage_v = required_voltage_v
        self.v_max = v_max
        super().__init__(
            f"resonance needs {required_voltage_v:.1f} V, beyond the +/-{v_max:.1f} V limit"
        )


class OrientationClass(Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class StarkTensors:
    """Tensor form of the field response.

    ``delta_mu`` is the permanent-dipole difference already divided by
    Planck's constant (MHz per V/cm); ``delta_alpha`` is the
    polarizability difference on the same footing (MHz per (V/cm)^2);
    ``local_field_correction`` maps the applied field to the local one.
    """

    delta_mu_mhz_per_v_cm: tuple[float, float, float]
    local_field_correction: tuple[tuple[float, float, float], ...] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )
    delta_alpha_mhz_per_v_cm2: tuple[tuple[float, float, float], ...] = (
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    )

    def __post_init__(self) -> None:
        alpha = np.asarray(self.delta_alpha_mhz_per_v_cm2, dtype=float)
        lfc = np.asarray(self.local_field_correction, dtype=float)
        if alpha.shape != (3, 3) or lfc.shape != (3, 3):
            raise StarkModelError("tensors must be 3x3")
        if not np.allclose(alpha, alpha.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(alpha).max())):
            raise StarkModelError("polarizability difference must be symmetric")
        if not np.all(np.isfinite(lfc)) or not np.all(np.isfinite(alpha)):
            raise StarkModelError("tensor entries must be finite")


@dataclass(frozen=True)
class IonModel:
    """One emitter's spectral identity and field response."""

    ion_id: str
    zero_field_frequency_mhz: float
    stark_coefficient_khz_per_v_cm: float
    orientation_class: OrientationClass
    zero_field_fwhm_mhz: float
    broadening_mhz_per_kv_cm: float = 0.0
    tensors: StarkTensors | None = None

    def __post_init__(self) -> None:
        if self.zero_field_fwhm_mhz <= 0.0:
            raise StarkModelError(f"{self.ion_id}: zero-field linewidth must be positive")
        if self.broadening_mhz_per_kv_cm < 0.0:
            raise StarkModelError(f"{self.ion_id}: broadening coefficient must be >= 0")
        s = self.stark_coefficient_khz_per_v_cm
        expected = OrientationClass.PLUS if s > 0 else OrientationClass.MINUS
        if s != 0.0 and self.orientation_class is not expected:
            raise StarkModelError(
                f"{self.ion_id}: orientation class {self.orientation_class.value} "
                f"contradicts coefficient sign {s:+g}"
            )


@dataclass(frozen=True)
class ShiftResult:
    shift_mhz: float
    fwhm_mhz: float


def stark_shift_full(tensors: StarkTensors, field_v_per_cm: Sequence[float]) -> float:
    """Quadratic-order frequency shift in MHz for a 3-vector field.

    Evaluates ``-dmu . (L E) - (L E) . dalpha . (L E) / 2`` with the
    local field ``L E``.
    """
    e = np.asarray(field_v_per_cm, dtype=float)
    if e.shape != (3,) or not np.all(np.isfinite(e)):
        raise StarkModelError("field must be a finite 3-vector")
    local = np.asarray(tensors.local_field_correction) @ e
    dmu = np.asarray(tensors.delta_mu_mhz_per_v_cm, dtype=float)
    alpha = np.asarray(tensors.delta_alpha_mhz_per_v_cm2, dtype=float)
    return float(-dmu @ local - 0.5 * local @ alpha @ local)


def stark_shift_empirical(ion: IonModel, field: FieldVector) -> ShiftResult:
    """Scalar-coefficient shift and field-broadened linewidth.

    Only the component along the inter-electrode axis couples; the
    linewidth grows linearly with its magnitude.
    """
    e_par = field.e_parallel_v_per_cm
    shift = ion.stark_coefficient_khz_per_v_cm * e_par / KHZ_PER_MHZ
    fwhm = ion.zero_field_fwhm_mhz + ion.broadening_mhz_per_kv_cm * abs(e_par) / V_PER_CM_PER_KV_PER_CM
    return ShiftResult(shift_mhz=shift, fwhm_mhz=fwhm)


def orientation_shifts(
    magnitude_khz_per_v_cm: float,
    field: FieldVector,
    field_perp_b: bool,
    projections: Sequence[tuple[float, float]] | None = None,
) -> list[float]:
    """Shifts of the four crystal-site orientations, sorted ascending (MHz).

    With the field perpendicular to the crystal b axis the four
    orientations collapse pairwise, giving two shifts of equal magnitude
    and opposite sign, each twice. Otherwise the caller supplies four
    unit projections of the site axes onto the (parallel, perpendicular)
    field plane.
    """
    if magnitude_khz_per_v_cm < 0.0:
        raise StarkModelError("coefficient magnitude must be >= 0")
    if field_perp_b:
        shift = magnitude_khz_per_v_cm * field.e_parallel_v_per_cm / KHZ_PER_MHZ
        return sorted([shift, shift, -shift, -shift])
    if projections is None or len(projections) != 4:
        raise StarkModelError("four orientation projections are required when the field is not perpendicular to b")
    e = np.array([field.e_parallel_v_per_cm, field.e_perpendicular_v_per_cm])
    shifts = [magnitude_khz_per_v_cm * float(np.dot(p, e)) / KHZ_PER_MHZ for p in projections]
    return sorted(shifts)


def resonance_voltage(
    ion_a: IonModel,
    ion_b: IonModel,
    volts_to_field_v_per_cm_per_v: float,
    v_max: float,
) -> float:
    """Bias voltage that aligns two ions' shifted frequencies.

    Both ions share the same electrode field, so the condition is
    ``f_a + s_a E(V) = f_b + s_b E(V)`` with ``E(V)`` linear in ``V``.

    Raises
    ------
    NoResonanceError
        If the coefficients are equal but the zero-field frequencies differ.
    VoltageOutOfRangeError
        If the closed-form voltage exceeds ``v_max`` in magnitude.
    """
    if volts_to_field_v_per_cm_per_v <= 0.0:
        raise StarkModelError("volts-to-field scale must be positive")
    if v_max <= 0.0:
        raise StarkModelError("voltage limit must be positive")
    df_mhz = ion_b.zero_field_frequency_mhz - ion_a.zero_field_frequency_mhz
    ds = ion_a.stark_coefficient_khz_per_v_cm - ion_b.stark_coefficient_khz_per_v_cm
    if ds == 0.0:
        if df_mhz == 0.0:
            return 0.0
        raise NoResonanceError(
            f"{ion_a.ion_id} and {ion_b.ion_id} share the Stark coefficient; "
            f"the {df_mhz:+g} MHz offset cannot be closed"
        )
    slope_mhz_per_v = ds * volts_to_field_v_per_cm_per_v / KHZ_PER_MHZ
    voltage = df_mhz / slope_mhz_per_v
    if abs(voltage) > v_max:
        raise VoltageOutOfRangeError(voltage, v_max)
    return voltage
