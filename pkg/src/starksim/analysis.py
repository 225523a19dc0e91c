"""Parameter extraction from photon-counting data.

Peak finding on PLE scans, Lorentzian and exponential fits with Poisson
weighting (variance = max(counts, 1)), inverse-variance weighted linear
regression for the field response, and the coincidence-ratio estimate of
the zero-lag autocorrelation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .csvio import read_table, write_table
from .experiment import G2Histogram, Histogram, ScanResult
from .optimize import (
    DegenerateDataError,
    FitConvergenceError,
    FitError,
    FitResult,
    SingularDesignError,
    least_squares,
)

__all__ = [
    "G2Estimate",
    "PeakCandidate",
    "UndefinedNormalizationError",
    "estimate_g2_zero",
    "exponential_decay",
    "exponential_decay_jacobian",
    "find_peaks",
    "fit_exponential_decay",
    "fit_linear_weighted",
    "fit_lorentzian",
    "lorentzian",
    "lorentzian_jacobian",
    "read_decay_csv",
    "read_g2_csv",
    "read_ple_csv",
    "write_fit_report_csv",
]


class UndefinedNormalizationError(FitError):
    """All side lags empty: the coincidence ratio has no denominator."""


@dataclass(frozen=True)
class PeakCandidate:
    center_mhz: float
    height_counts: float
    prominence: float


@dataclass(frozen=True)
class G2Estimate:
    g2_zero: float
    standard_error: float


# ---------------------------------------------------------------------------
# model functions


def lorentzian(x: np.ndarray, params: np.ndarray) -> np.ndarray:
    """amplitude / (1 + (2 (x - center) / fwhm)^2) + offset"""
    amplitude, center, fwhm, offset = params
    u = 2.0 * (x - center) / fwhm
    return amplitude / (1.0 + u * u) + offset


def lorentzian_jacobian(x: np.ndarray, params: np.ndarray) -> np.ndarray:
    amplitude, center, fwhm, _ = params
    u = 2.0 * (x - center) / fwhm
    denom = 1.0 + u * u
    jac = np.empty((x.size, 4))
    jac[:, 0] = 1.0 / denom
    jac[:, 1] = amplitude * 4.0 * u / (fwhm * denom * denom)
    jac[:, 2] = amplitude * 2.0 * u * u / (fwhm * denom * denom)
    jac[:, 3] = 1.0
    return jac


def exponential_decay(t: np.ndarray, params: np.ndarray) -> np.ndarray:
    """amplitude * exp(-t / tau) + background"""
    amplitude, tau, background = params
    return amplitude * np.exp(-t / tau) + background


def exponential_decay_jacobian(t: np.ndarray, params: np.ndarray) -> np.ndarray:
    amplitude, tau, _ = params
    decay = np.exp(-t / tau)
    jac = np.empty((t.size, 3))
    jac[:, 0] = decay
    jac[:, 1] = amplitude * decay * (t / tau) / tau  # grouped to avoid tau^2 overflow
    jac[:, 2] = 1.0
    return jac


def _poisson_weights(counts: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(counts, 1.0)


_REWEIGHT_CYCLES = 2


def _fit_counts(model, jacobian, x, y, initial, names) -> FitResult:
    """Poisson-weighted fit with model-based reweighting.

    The first pass weights by the observed counts (variance =
    max(counts, 1)); subsequent passes re-evaluate the variance at the
    fitted means. Weighting by raw observations alone biases parameters
    low at these count levels because downward-fluctuating bins get
    extra weight.
    """
    result = least_squares(model, jacobian, x, y, _poisson_weights(y), initial, names)
    for _ in range(_REWEIGHT_CYCLES):
        weights = _poisson_weights(model(x, result.values))
        result = least_squares(model, jacobian, x, y, weights, result.values, names)
    return result


# ---------------------------------------------------------------------------
# peak finding


def find_peaks(scan: ScanResult, threshold_sigma: float) -> list[PeakCandidate]:
    """Prominent local maxima of a scan, sorted by center frequency.

    Counts are smoothed with a [1, 2, 1]/4 kernel before peak finding so
    single-sample shot-noise spikes do not qualify; prominence is
    measured on the smoothed trace against the higher of the two
    enclosing valleys, and must exceed
    ``threshold_sigma * sqrt(median count)``. Reported heights are the
    raw counts at the peak sample; plateau ties resolve to the lower
    frequency.
    """
    counts = np.asarray(scan.counts, dtype=float)
    if counts.size == 0:
        raise ValueError("scan is empty")
    if counts.size < 3:
        return []
    padded = np.concatenate([counts[:1], counts, counts[-1:]])
    smooth = (padded[:-2] + 2.0 * padded[1:-1] + padded[2:]) / 4.0

    background = float(np.median(counts))
    threshold = threshold_sigma * math.sqrt(background)

    candidates = []
    for idx in _local_maxima(smooth):
        prominence = _prominence(smooth, idx)
        if prominence > threshold:
            candidates.append(
                PeakCandidate(
                    center_mhz=float(scan.frequencies_mhz[idx]),
                    height_counts=float(counts[idx]),
                    prominence=float(prominence),
                )
            )
    candidates.sort(key=lambda c: c.center_mhz)
    return candidates


def _local_maxima(values: np.ndarray) -> list[int]:
    """Indices of strict local maxima; a flat plateau yields its first index."""
    maxima = []
    n = values.size
    i = 1
    while i < n - 1:
        if values[i] > values[i - 1]:
            j = i
            while j + 1 < n and values[j + 1] == values[i]:
                j += 1
            if j < n - 1 and values[j + 1] < values[i]:
                maxima.append(i)
            i = j + 1
        else:
            i += 1
    return maxima


def _prominence(values: np.ndarray, peak: int) -> float:
    """Topographic prominence: height above the higher enclosing valley."""
    height = values[peak]
    left_min = height
    for i in range(peak - 1, -1, -1):
        if values[i] > height:
            break
        left_min = min(left_min, values[i])
    right_min = height
    for i in range(peak + 1, values.size):
        if values[i] > height:
            break
        right_min = min(right_min, values[i])
    return float(height - max(left_min, right_min))


# ---------------------------------------------------------------------------
# fits


def fit_lorentzian(
    frequencies_mhz: Sequence[float] | np.ndarray,
    counts: Sequence[float] | np.ndarray,
    initial: Sequence[float] | None = None,
) -> FitResult:
    """Poisson-weighted Lorentzian fit; parameters (amplitude, center_mhz,
    fwhm_mhz, offset).

    Self-initializes from the highest sample and the half-height
    crossings when no guess is given.
    """
    x = np.asarray(frequencies_mhz, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.size < 8:
        raise DegenerateDataError(f"need at least 8 points, got {x.size}")
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("counts are constant; nothing to fit")
    if initial is None:
        initial = _lorentzian_guess(x, y)
    result = _fit_counts(
        lorentzian,
        lorentzian_jacobian,
        x,
        y,
        initial,
        ("amplitude", "center_mhz", "fwhm_mhz", "offset"),
    )
    # the model is even in fwhm; canonicalize the sign, then reject widths
    # the sampling cannot resolve (a spike latched onto a single sample)
    values = result.values.copy()
    values[2] = abs(values[2])
    result = FitResult(
        names=result.names,
        values=values,
        stderrs=result.stderrs,
        reduced_chi_square=result.reduced_chi_square,
        converged=result.converged,
        iterations=result.iterations,
    )
    pitch = float(np.median(np.diff(np.sort(x))))
    if not np.all(np.isfinite(values)) or values[2] < 0.5 * pitch:
        raise FitConvergenceError(
            f"fit collapsed to an unresolvable width {values[2]:.3g} MHz", result
        )
    return result


def _lorentzian_guess(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    offset = float(np.median(y))
    peak = int(np.argmax(y))
    amplitude = max(float(y[peak]) - offset, 1e-9)
    center = float(x[peak])
    half = offset + amplitude / 2.0
    left = x[0]
    for i in range(peak, -1, -1):
        if y[i] < half:
            left = x[i]
            break
    right = x[-1]
    for i in range(peak, x.size):
        if y[i] < half:
            right = x[i]
            break
    fwhm = max(float(right - left), float(np.median(np.diff(x))))
    return np.array([amplitude, center, fwhm, offset])


def fit_exponential_decay(
    histogram: Histogram,
    fit_start_us: float = 0.0,
    known_background: float | None = None,
) -> FitResult:
    """Poisson-weighted exponential fit of a decay histogram from
    ``fit_start_us`` on; parameters (amplitude, tau_us, background).

    On a window of only ~2 lifetimes a free background is almost fully
    anticorrelated with the lifetime; when the dark floor per bin is
    known from the detector calibration, pass it as
    ``known_background`` to pin it (its reported error is then zero).
    """
    t = histogram.bin_centers_us
    y = np.asarray(histogram.counts, dtype=float)
    keep = t >= fit_start_us
    t, y = t[keep], y[keep]
    if t.size < 4:
        raise DegenerateDataError("too few bins past the fit start")
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("histogram is constant; nothing to fit")
    guess = _decay_guess(t, y)
    if known_background is None:
        result = _fit_counts(
            exponential_decay,
            exponential_decay_jacobian,
            t,
            y,
            guess,
            ("amplitude", "tau_us", "background"),
        )
        return _check_decay_result(result, t)

    floor = float(known_background)

    def pinned(tt: np.ndarray, params: np.ndarray) -> np.ndarray:
        return exponential_decay(tt, np.array([params[0], params[1], floor]))

    def pinned_jacobian(tt: np.ndarray, params: np.ndarray) -> np.ndarray:
        return exponential_decay_jacobian(tt, np.array([params[0], params[1], floor]))[:, :2]

    partial = _fit_counts(
        pinned,
        pinned_jacobian,
        t,
        y,
        np.array([max(guess[0] + guess[2] - floor, 1e-9), guess[1]]),
        ("amplitude", "tau_us"),
    )
    result = FitResult(
        names=("amplitude", "tau_us", "background"),
        values=np.append(partial.values, floor),
        stderrs=np.append(partial.stderrs, 0.0),
        reduced_chi_square=partial.reduced_chi_square,
        converged=partial.converged,
        iterations=partial.iterations,
    )
    return _check_decay_result(result, t)


def _check_decay_result(result: FitResult, t: np.ndarray) -> FitResult:
    """Reject lifetimes the window cannot constrain (runaway or negative)."""
    tau = result.value("tau_us")
    span = float(t[-1] - t[0])
    if not np.all(np.isfinite(result.values)) or tau <= 0.0 or tau > 50.0 * span:
        raise FitConvergenceError(f"lifetime {tau:.3g} us is unconstrained by the data", result)
    return result


def _decay_guess(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    tail = max(t.size // 10, 1)
    background = float(y[-tail:].mean())
    amplitude = max(float(y[0]) - background, 1e-9)
    probe = min(max(t.size // 3, 1), t.size - 1)
    drop = (y[probe] - background) / amplitude
    if 0.0 < drop < 1.0:
        tau = float((t[probe] - t[0]) / -math.log(drop))
    else:
        tau = float((t[-1] - t[0]) / 3.0)
    return np.array([amplitude, max(tau, 1e-6), background])


def fit_linear_weighted(
    fields_v_per_cm: Sequence[float] | np.ndarray,
    shifts_mhz: Sequence[float] | np.ndarray,
    shift_errors_mhz: Sequence[float] | np.ndarray,
) -> FitResult:
    """Inverse-variance weighted straight line through (field, shift) data.

    Returns (slope_khz_per_v_cm, intercept_mhz); the slope is the Stark
    coefficient in kHz/(V/cm). Non-positive errors fall back to uniform
    weights, in which case errors are scaled from the residual variance.
    """
    x = np.asarray(fields_v_per_cm, dtype=float)
    y = np.asarray(shifts_mhz, dtype=float)
    err = np.asarray(shift_errors_mhz, dtype=float)
    if x.size < 3:
        raise DegenerateDataError(f"need at least 3 points, got {x.size}")
    if np.ptp(x) == 0.0:
        raise SingularDesignError("all field values identical; slope is undefined")

    calibrated = bool(np.all(err > 0.0))
    w = 1.0 / (err * err) if calibrated else np.ones_like(y)

    sw = w.sum()
    xbar = float((w * x).sum() / sw)
    ybar = float((w * y).sum() / sw)
    sxx = float((w * (x - xbar) ** 2).sum())
    slope_mhz = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    intercept = ybar - slope_mhz * xbar

    residual = y - (slope_mhz * x + intercept)
    chi2 = float((w * residual * residual).sum())
    dof = x.size - 2
    reduced = chi2 / dof if dof > 0 else float("nan")

    var_slope = 1.0 / sxx
    var_intercept = 1.0 / sw + xbar * xbar / sxx
    if not calibrated and dof > 0:
        var_slope *= chi2 / dof
        var_intercept *= chi2 / dof

    return FitResult(
        names=("slope_khz_per_v_cm", "intercept_mhz"),
        values=np.array([slope_mhz * 1000.0, intercept]),
        stderrs=np.array([math.sqrt(var_slope) * 1000.0, math.sqrt(var_intercept)]),
        reduced_chi_square=reduced,
        converged=True,
        iterations=0,
    )


def estimate_g2_zero(histogram: G2Histogram) -> G2Estimate:
    """Zero-lag coincidences over the mean of the side lags.

    Standard error propagates Poisson uncertainties of the zero-lag
    count (floored at 1 event for an empty bin) and of the side-lag
    mean; the estimate itself is invariant under a uniform rescaling of
    the histogram.
    """
    lags = np.asarray(histogram.lags)
    coincidences = np.asarray(histogram.coincidences, dtype=float)
    side = coincidences[lags != 0]
    if np.count_nonzero(side) < 3:
        raise UndefinedNormalizationError("need at least 3 nonzero side lags to normalize")
    c0 = float(coincidences[lags == 0][0])
    mean_side = float(side.mean())
    g2 = c0 / mean_side
    var_c0 = max(c0, 1.0)
    var_mean = side.sum() / side.size**2
    sigma = math.sqrt(var_c0 / mean_side**2 + (c0 * c0) * var_mean / mean_side**4)
    return G2Estimate(g2_zero=g2, standard_error=sigma)


# ---------------------------------------------------------------------------
# CSV interfaces


def write_fit_report_csv(rows: Sequence[tuple[str, float, float, str]], path: str | Path) -> None:
    """Rows: (quantity, value, stderr, units)."""
    write_table(path, ["quantity", "value", "stderr", "units"], rows)


def read_ple_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, float]:
    rows = read_table(path, ["frequency_offset_mhz", "counts", "integration_s"])
    freq = np.array([float(r[0]) for r in rows])
    counts = np.array([int(r[1]) for r in rows], dtype=np.int64)
    integration = float(rows[0][2]) if rows else float("nan")
    return freq, counts, integration


def read_decay_csv(path: str | Path) -> Histogram:
    rows = read_table(path, ["time_us", "counts"])
    centers = np.array([float(r[0]) for r in rows])
    counts = np.array([int(r[1]) for r in rows], dtype=np.int64)
    if centers.size < 2:
        raise ValueError(f"{path}: need at least two bins")
    width = float(np.median(np.diff(centers)))
    edges = np.concatenate([centers - width / 2.0, [centers[-1] + width / 2.0]])
    return Histogram(bin_edges_us=edges, counts=counts)


def read_g2_csv(path: str | Path) -> G2Histogram:
    rows = read_table(path, ["lag_pulses", "coincidences", "normalized"])
    lags = np.array([int(r[0]) for r in rows])
    coincidences = np.array([int(r[1]) for r in rows], dtype=np.int64)
    return G2Histogram(lags=lags, coincidences=coincidences)
