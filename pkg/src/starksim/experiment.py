"""Seeded Monte Carlo of the pulsed photon-counting experiments.

One protocol drives everything: an excitation pulse, a short blanking
delay, then a gated detection window before the next pulse. Within a
pulse an emitter is excited at most once (pulse length is well under the
lifetime), decays with an exponential delay measured from the pulse end,
and is detected with the overall collection efficiency if the photon
falls inside the window. Dark counts are a homogeneous Poisson process
over the open window.

Determinism contract: every scan point draws from its own generator,
seeded as ``splitmix64(master_seed, point_index)``, so results are
bit-identical for any worker count or execution order.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .cavity import EffectiveEmitter, excitation_probability
from .csvio import write_table
from .electrostatics import DielectricMap, ElectrodeLayout, FieldVector, field_at, solve_potential
from .stark import IonModel, stark_shift_empirical

__all__ = [
    "G2Histogram",
    "Histogram",
    "PhotonOrigin",
    "PhotonRecord",
    "PLEProtocol",
    "DetectorModel",
    "ScanResult",
    "SimulatedIon",
    "StarkScanPoint",
    "SimulationError",
    "config_digest",
    "emission_window_probability",
    "mix_seed",
    "point_generator",
    "simulate_decay_histogram",
    "simulate_decay_records",
    "simulate_g2_histogram",
    "simulate_ple_scan",
    "simulate_stark_scan",
    "write_decay_csv",
    "write_g2_csv",
    "write_ple_csv",
    "write_stark_csv",
]

DEFAULT_MASTER_SEED = 0xE53_1536

_MASK64 = (1 << 64) - 1


class SimulationError(ValueError):
    pass


def mix_seed(master_seed: int, index: int) -> int:
    """splitmix64 finalizer over ``master_seed + (index+1)*golden_gamma``.

    This is the one mixing function used to derive independent per-point
    streams from a master seed; it is part of the reproducibility
    contract, so do not change it.
    """
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def point_generator(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix_seed(master_seed, index)))


@dataclass(frozen=True)
class PLEProtocol:
    """Pulse train and scan settings of the gated excitation experiment."""

    pulse_length_us: float = 10.0
    repetition_rate_khz: float = 10.0
    window_delay_us: float = 1.0
    window_length_us: float = 85.0
    integration_time_s: float = 5.0
    scan_pitch_mhz: float = 5.0
    scan_range_mhz: tuple[float, float] = (-300.0, 300.0)

    def __post_init__(self) -> None:
        for name in (
            "pulse_length_us",
            "repetition_rate_khz",
            "window_delay_us",
            "window_length_us",
            "integration_time_s",
            "scan_pitch_mhz",
        ):
            if getattr(self, name) <= 0.0:
                raise SimulationError(f"{name} must be positive")
        if self.pulse_length_us + self.window_delay_us + self.window_length_us > self.period_us:
            raise SimulationError(
                "pulse + delay + window exceed the repetition period "
                f"({self.period_us:g} us at {self.repetition_rate_khz:g} kHz)"
            )
        lo, hi = self.scan_range_mhz
        if not lo < hi:
            raise SimulationError("scan range must be increasing")

    @property
    def period_us(self) -> float:
        return 1000.0 / self.repetition_rate_khz

    @property
    def pulses_per_point(self) -> int:
        return int(round(self.integration_time_s * self.repetition_rate_khz * 1000.0))

    def scan_frequencies_mhz(self) -> np.ndarray:
        lo, hi = self.scan_range_mhz
        n = int(math.floor((hi - lo) / self.scan_pitch_mhz + 1e-9)) + 1
        return lo + self.scan_pitch_mhz * np.arange(n)

    def replace_scan(self, lo_mhz: float, hi_mhz: float) -> "PLEProtocol":
        return PLEProtocol(
            pulse_length_us=self.pulse_length_us,
            repetition_rate_khz=self.repetition_rate_khz,
            window_delay_us=self.window_delay_us,
            window_length_us=self.window_length_us,
            integration_time_s=self.integration_time_s,
            scan_pitch_mhz=self.scan_pitch_mhz,
            scan_range_mhz=(lo_mhz, hi_mhz),
        )


@dataclass(frozen=True)
class DetectorModel:
    """Overall collection efficiency (excitation x transmission x detector)
    and detector dark-count rate."""

    total_efficiency: float = 0.01
    dark_rate_hz: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.total_efficiency <= 1.0:
            raise SimulationError("total efficiency must lie in [0, 1]")
        if self.dark_rate_hz < 0.0:
            raise SimulationError("dark rate must be >= 0")

    def dark_mean_per_pulse(self, window_length_us: float) -> float:
        return self.dark_rate_hz * window_length_us * 1e-6


class PhotonOrigin(Enum):
    SIGNAL = "signal"
    DARK = "dark"


@dataclass(frozen=True)
class PhotonRecord:
    """One detected event; the origin tag exists for oracle tests only and
    is never consulted by the analysis path."""

    pulse_index: int
    time_in_window_us: float
    origin: PhotonOrigin


@dataclass(frozen=True)
class ScanResult:
    """Counts per scan frequency for one integration per point."""

    frequencies_mhz: np.ndarray
    counts: np.ndarray
    integration_s: float
    master_seed: int
    config_digest: str

    @property
    def points(self) -> list[tuple[float, int, float]]:
        return [
            (float(f), int(c), self.integration_s)
            for f, c in zip(self.frequencies_mhz, self.counts)
        ]


@dataclass(frozen=True)
class Histogram:
    """Binned arrival times within the detection window."""

    bin_edges_us: np.ndarray
    counts: np.ndarray

    @property
    def bin_centers_us(self) -> np.ndarray:
        return (self.bin_edges_us[:-1] + self.bin_edges_us[1:]) / 2.0


@dataclass(frozen=True)
class G2Histogram:
    """Coincidences of a 50/50 detection split versus pulse lag."""

    lags: np.ndarray
    coincidences: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        side = self.coincidences[self.lags != 0]
        mean_side = side.mean() if side.size else float("nan")
        return self.coincidences / mean_side


@dataclass(frozen=True)
class SimulatedIon:
    """Pairing of an ion's field response with its cavity-modified emitter."""

    model: IonModel
    emitter: EffectiveEmitter


@dataclass(frozen=True)
class StarkScanPoint:
    voltage_v: float
    field: FieldVector
    scan: ScanResult


def emission_window_probability(lifetime_us: float, delay_us: float, window_us: float) -> float:
    """Chance an exponential emission (clock at pulse end) lands in the window."""
    return math.exp(-delay_us / lifetime_us) - math.exp(-(delay_us + window_us) / lifetime_us)


def config_digest(*parts: object) -> str:
    """Stable hex digest of the simulation inputs (dataclasses included)."""

    def canonical(obj: object) -> str:
        if isinstance(obj, float):
            return format(obj, ".17g")
        if isinstance(obj, (int, str, bool)) or obj is None:
            return repr(obj)
        if isinstance(obj, Enum):
            return repr(obj.value)
        if isinstance(obj, np.ndarray):
            return "[" + ",".join(canonical(v) for v in obj.tolist()) + "]"
        if isinstance(obj, (list, tuple)):
            return "[" + ",".join(canonical(v) for v in obj) + "]"
        if isinstance(obj, dict):
            return "{" + ",".join(f"{k}:{canonical(v)}" for k, v in sorted(obj.items())) + "}"
        if hasattr(obj, "__dataclass_fields__"):
            fields = {name: getattr(obj, name) for name in obj.__dataclass_fields__}
            return type(obj).__name__ + canonical(fields)
        return repr(obj)

    return hashlib.sha256(canonical(parts).encode("utf-8")).hexdigest()


def _shifted_line(ion: SimulatedIon, field: FieldVector) -> tuple[float, float]:
    """Line centre and broadened width of an ion under the applied field."""
    response = stark_shift_empirical(ion.model, field)
    centre = ion.model.zero_field_frequency_mhz + response.shift_mhz
    return centre, response.fwhm_mhz


def simulate_ple_scan(
    ions: Sequence[SimulatedIon],
    protocol: PLEProtocol,
    detector: DetectorModel,
    field: FieldVector,
    seed: int,
    *,
    n_workers: int = 1,
) -> ScanResult:
    """Photon counts versus excitation frequency under the pulse protocol.

    Per pulse and per ion: Bernoulli excitation with the Lorentzian
    detuning probability, exponential emission delay, detection iff the
    photon falls in the window and survives the collection efficiency.
    Dark counts add as Poisson background. Per-frequency counts only are
    returned; arrival times are not needed for a scan.
    """
    frequencies = protocol.scan_frequencies_mhz()
    n_pulses = protocol.pulses_per_point
    digest = config_digest(list(ions), protocol, detector, field)

    lines = []
    for ion in ions:
        centre, fwhm = _shifted_line(ion, field)
        probe = EffectiveEmitter(
            lifetime_us=ion.emitter.lifetime_us,
            fwhm_mhz=fwhm,
            frequency_mhz=centre,
            saturation_excitation_prob=ion.emitter.saturation_excitation_prob,
        )
        window_prob = emission_window_probability(
            probe.lifetime_us, protocol.window_delay_us, protocol.window_length_us
        )
        lines.append((probe, window_prob))

    dark_mean = detector.dark_mean_per_pulse(protocol.window_length_us) * n_pulses

    def one_point(index: int) -> int:
        rng = point_generator(seed, index)
        freq = frequencies[index]
        total = 0
        for probe, window_prob in lines:
            p_exc = excitation_probability(probe, freq - probe.frequency_mhz)
            excited = rng.binomial(n_pulses, p_exc)
            total += rng.binomial(excited, detector.total_efficiency * window_prob)
        total += rng.poisson(dark_mean)
        return int(total)

    counts = _map_points(one_point, len(frequencies), n_workers)
    return ScanResult(
        frequencies_mhz=frequencies,
        counts=np.asarray(counts, dtype=np.int64),
        integration_s=protocol.integration_time_s,
        master_seed=seed,
        config_digest=digest,
    )


def _map_points(work, n_points: int, n_workers: int) -> list:
    if n_workers <= 1 or n_points <= 1:
        return [work(i) for i in range(n_points)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(work, range(n_points)))


def simulate_decay_records(
    effective: EffectiveEmitter,
    protocol: PLEProtocol,
    detector: DetectorModel,
    n_pulses: int,
    seed: int,
) -> list[PhotonRecord]:
    """Time-tagged detections for an on-resonance lifetime measurement.

    Arrival times are continuous (no pre-binning); each pulse excites at
    most once, emissions before the window opens are lost to the gate.
    """
    pulse_idx, times, origins = _decay_arrays(effective, protocol, detector, n_pulses, seed)
    return [
        PhotonRecord(int(p), float(t), PhotonOrigin.SIGNAL if s else PhotonOrigin.DARK)
        for p, t, s in zip(pulse_idx, times, origins)
    ]


def _decay_arrays(
    effective: EffectiveEmitter,
    protocol: PLEProtocol,
    detector: DetectorModel,
    n_pulses: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n_pulses <= 0:
        raise SimulationError("n_pulses must be positive")
    rng = point_generator(seed, 0)
    p_exc = effective.saturation_excitation_prob

    excited_pulses = np.flatnonzero(rng.random(n_pulses) < p_exc)
    delays = rng.exponential(effective.lifetime_us, excited_pulses.size)
    lo = protocol.window_delay_us
    hi = protocol.window_delay_us + protocol.window_length_us
    in_window = (delays >= lo) & (delays <= hi)
    detected = in_window & (rng.random(excited_pulses.size) < detector.total_efficiency)
    signal_pulses = excited_pulses[detected]
    signal_times = delays[detected] - lo

    n_dark = rng.poisson(detector.dark_mean_per_pulse(protocol.window_length_us) * n_pulses)
    dark_pulses = rng.integers(0, n_pulses, n_dark)
    dark_times = rng.uniform(0.0, protocol.window_length_us, n_dark)

    pulse_idx = np.concatenate([signal_pulses, dark_pulses])
    times = np.concatenate([signal_times, dark_times])
    origins = np.concatenate([np.ones(signal_pulses.size, bool), np.zeros(n_dark, bool)])
    return pulse_idx, times, origins


def simulate_decay_histogram(
    effective: EffectiveEmitter,
    protocol: PLEProtocol,
    detector: DetectorModel,
    n_pulses: int,
    bin_width_us: float,
    seed: int,
) -> Histogram:
    """Histogram of detection times within the window (decay curve)."""
    if bin_width_us <= 0.0:
        raise SimulationError("bin width must be positive")
    _, times, _ = _decay_arrays(effective, protocol, detector, n_pulses, seed)
    n_bins = max(int(math.ceil(protocol.window_length_us / bin_width_us - 1e-9)), 1)
    edges = bin_width_us * np.arange(n_bins + 1)
    counts, _ = np.histogram(times, bins=edges)
    return Histogram(bin_edges_us=edges, counts=counts.astype(np.int64))


def simulate_g2_histogram(
    effective: EffectiveEmitter,
    background_fraction: float,
    protocol: PLEProtocol,
    n_pulses: int,
    max_lag: int,
    seed: int,
    *,
    signal_statistics: str = "single",
) -> G2Histogram:
    """Hanbury Brown-Twiss coincidences versus pulse lag.

    The emitter contributes at most one detected photon per pulse;
    ``background_fraction`` of all detected events come from a Poissonian
    background instead. Every event is routed 50/50 to the two arms and
    ``C(k)`` counts arm-A events against arm-B events ``k`` pulses later.
    ``signal_statistics="poissonian"`` swaps the emitter for a coherent
    source of the same mean rate (the classical control).
    """
    if not 0.0 <= background_fraction < 1.0:
        raise SimulationError("background fraction must lie in [0, 1)")
    if max_lag < 1:
        raise SimulationError("max lag must be >= 1")
    if n_pulses <= max_lag:
        raise SimulationError("need more pulses than the maximum lag")
    if signal_statistics not in ("single", "poissonian"):
        raise SimulationError(f"unknown signal statistics {signal_statistics!r}")

    rng = point_generator(seed, 0)
    p_signal = effective.saturation_excitation_prob * emission_window_probability(
        effective.lifetime_us, protocol.window_delay_us, protocol.window_length_us
    )
    background_mean = background_fraction / (1.0 - background_fraction) * p_signal

    if signal_statistics == "single":
        events = (rng.random(n_pulses) < p_signal).astype(np.int64)
    else:
        events = rng.poisson(p_signal, n_pulses)
    if background_mean > 0.0:
        events += rng.poisson(background_mean, n_pulses)
    arm_a = rng.binomial(events, 0.5)
    arm_b = events - arm_a

    lags = np.arange(-max_lag, max_lag + 1)
    coincidences = np.empty(lags.size, dtype=np.int64)
    for i, lag in enumerate(lags):
        k = abs(int(lag))
        if lag >= 0:
            coincidences[i] = int(np.dot(arm_a[: n_pulses - k], arm_b[k:]))
        else:
            coincidences[i] = int(np.dot(arm_a[k:], arm_b[: n_pulses - k]))
    return G2Histogram(lags=lags, coincidences=coincidences)


def simulate_stark_scan(
    ion: SimulatedIon,
    voltages_v: Sequence[float],
    layout: ElectrodeLayout,
    dielectric: DielectricMap,
    protocol: PLEProtocol,
    detector: DetectorModel,
    seed: int,
    *,
    spacing_um: float | None = None,
    tolerance_v: float = 1e-4,
    omega: float = 1.9,
    window_half_width_mhz: float = 60.0,
    v_max: float = 333.0,
    n_workers: int = 1,
) -> list[StarkScanPoint]:
    """PLE scans of one ion at a series of electrode voltages.

    The electrode problem is solved once at the layout bias and rescaled
    linearly to each voltage; each scan window tracks the expected
    Stark-shifted peak. Each voltage gets its own derived seed, so the
    list is reproducible regardless of evaluation order.
    """
    for v in voltages_v:
        if not math.isfinite(v) or abs(v) > v_max:
            raise SimulationError(f"voltage {v} V outside the +/-{v_max} V limit")

    reference = layout if layout.bias_v != 0.0 else layout.with_bias(1.0)
    grid = solve_potential(
        reference,
        dielectric,
        spacing_um if spacing_um is not None else layout.gap_um / 20.0,
        tolerance_v,
        omega=omega,
    )
    unit_field = field_at(grid, layout.probe_point_um).scaled(1.0 / reference.bias_v)

    results = []
    for v_index, voltage in enumerate(voltages_v):
        field = unit_field.scaled(voltage)
        centre, _ = _shifted_line(ion, field)
        base = round(centre / protocol.scan_pitch_mhz) * protocol.scan_pitch_mhz
        scan_protocol = protocol.replace_scan(
            base - window_half_width_mhz, base + window_half_width_mhz
        )
        scan = simulate_ple_scan(
            [ion],
            scan_protocol,
            detector,
            field,
            mix_seed(seed, v_index),
            n_workers=n_workers,
        )
        results.append(StarkScanPoint(voltage_v=float(voltage), field=field, scan=scan))
    return results


def write_ple_csv(scan: ScanResult, path) -> None:
    write_table(
        path,
        ["frequency_offset_mhz", "counts", "integration_s"],
        [(float(f), int(c), scan.integration_s) for f, c in zip(scan.frequencies_mhz, scan.counts)],
    )


def write_decay_csv(histogram: Histogram, path) -> None:
    write_table(
        path,
        ["time_us", "counts"],
        [(float(t), int(c)) for t, c in zip(histogram.bin_centers_us, histogram.counts)],
    )


def write_g2_csv(histogram: G2Histogram, path) -> None:
    normalized = histogram.normalized
    write_table(
        path,
        ["lag_pulses", "coincidences", "normalized"],
        [
            (int(lag), int(c), float(n))
            for lag, c, n in zip(histogram.lags, histogram.coincidences, normalized)
        ],
    )


def write_stark_csv(rows: Sequence[tuple], path) -> None:
    """Rows: (voltage_v, field_v_per_cm, peak_mhz, peak_err_mhz, fwhm_mhz, fwhm_err_mhz)."""
    write_table(
        path,
        ["voltage_v", "field_v_per_cm", "peak_mhz", "peak_err_mhz", "fwhm_mhz", "fwhm_err_mhz"],
        rows,
    )
