import math

import numpy as np
import pytest

from starksim.analysis import fit_lorentzian, read_decay_csv, read_g2_csv, read_ple_csv
from starksim.cavity import EffectiveEmitter
from starksim.electrostatics import DielectricMap, ElectrodeLayout, FieldVector
from starksim.experiment import (
    DetectorModel,
    PhotonOrigin,
    PLEProtocol,
    SimulationError,
    emission_window_probability,
    mix_seed,
    simulate_decay_histogram,
    simulate_decay_records,
    simulate_g2_histogram,
    simulate_ple_scan,
    simulate_stark_scan,
    write_decay_csv,
    write_g2_csv,
    write_ple_csv,
)
from starksim.stark import stark_shift_empirical


class TestSeedMixing:
    def test_known_values(self):
        # splitmix64 stream values; part of the reproducibility contract
        assert mix_seed(0, 0) == 16294208416658607535
        assert mix_seed(0, 1) == 7960286522194355700
        assert mix_seed(240325942, 0) == 9552938418645586555
        assert mix_seed(2**64 - 1, 5) == 15212506146343009075

    def test_outputs_distinct_across_points(self):
        seeds = {mix_seed(12345, k) for k in range(10_000)}
        assert len(seeds) == 10_000


class TestProtocolValidation:
    def test_window_must_fit_in_period(self):
        with pytest.raises(SimulationError):
            PLEProtocol(pulse_length_us=10.0, window_delay_us=10.0, window_length_us=85.0)

    def test_positive_fields(self):
        with pytest.raises(SimulationError):
            PLEProtocol(pulse_length_us=0.0)

    def test_scan_frequencies_step_by_pitch(self, config):
        freqs = config.protocol.scan_frequencies_mhz()
        assert freqs[0] == -300.0 and freqs[-1] == 300.0
        assert np.allclose(np.diff(freqs), 5.0)

    def test_pulses_per_point(self, config):
        assert config.protocol.pulses_per_point == 50_000


class TestPLEScan:
    def test_deterministic_and_worker_independent(self, config, ion1):
        proto = config.protocol.replace_scan(-50.0, 50.0)
        runs = [
            simulate_ple_scan([ion1], proto, config.detector, FieldVector(0.0, 0.0), 99, n_workers=w)
            for w in (1, 1, 4)
        ]
        assert np.array_equal(runs[0].counts, runs[1].counts)
        assert np.array_equal(runs[0].counts, runs[2].counts)
        assert runs[0].config_digest == runs[2].config_digest

    def test_zero_efficiency_and_darks_give_zero_counts(self, config, ion1):
        detector = DetectorModel(total_efficiency=0.0, dark_rate_hz=0.0)
        scan = simulate_ple_scan(
            [ion1], config.protocol.replace_scan(-20.0, 20.0), detector, FieldVector(0.0, 0.0), 1
        )
        assert np.all(scan.counts == 0)

    def test_ion_free_scan_matches_dark_expectation(self, config):
        proto = config.protocol.replace_scan(0.0, 5.0 * 999)
        scan = simulate_ple_scan([], proto, config.detector, FieldVector(0.0, 0.0), 7)
        expected = 2.0 * 85e-6 * 50_000  # rate x window x pulses
        assert expected == pytest.approx(8.5)
        sigma = math.sqrt(expected / scan.counts.size)
        assert abs(scan.counts.mean() - expected) < 3.0 * sigma

    def test_single_ion_linewidth_recovered(self, config, ion1):
        proto = config.protocol.replace_scan(-60.0, 60.0)
        scan = simulate_ple_scan([ion1], proto, config.detector, FieldVector(0.0, 0.0), 17)
        fit = fit_lorentzian(scan.frequencies_mhz, scan.counts)
        assert fit.value("fwhm_mhz") == pytest.approx(6.7, abs=3.0 * fit.stderr("fwhm_mhz"))
        assert fit.value("center_mhz") == pytest.approx(0.0, abs=3.0 * fit.stderr("center_mhz"))

    def test_counts_nonnegative_and_frequencies_increasing(self, config, ion1):
        scan = simulate_ple_scan(
            [ion1], config.protocol.replace_scan(-30.0, 30.0), config.detector,
            FieldVector(2000.0, 0.0), 3,
        )
        assert np.all(scan.counts >= 0)
        assert np.all(np.diff(scan.frequencies_mhz) > 0)


class TestDecay:
    def test_lifetime_recovered_within_two_percent(self, config, ion1):
        hist = simulate_decay_histogram(
            ion1.emitter, config.protocol, config.detector, 10_000_000, 1.0, 42
        )
        from starksim.analysis import fit_exponential_decay

        floor = config.detector.dark_rate_hz * 1e-6 * 10_000_000
        fit = fit_exponential_decay(hist, known_background=floor)
        assert fit.value("tau_us") == pytest.approx(41.007, rel=0.02)

    def test_zero_excitation_leaves_uniform_darks(self, config, ion1):
        emitter = EffectiveEmitter(
            lifetime_us=ion1.emitter.lifetime_us,
            fwhm_mhz=ion1.emitter.fwhm_mhz,
            saturation_excitation_prob=0.0,
        )
        records = simulate_decay_records(emitter, config.protocol, config.detector, 2_000_000, 5)
        assert records, "dark counts expected"
        assert all(r.origin is PhotonOrigin.DARK for r in records)
        times = np.array([r.time_in_window_us for r in records])
        # uniform over the window: mean near the middle
        assert times.mean() == pytest.approx(85.0 / 2.0, abs=3.0 * 85.0 / math.sqrt(12 * times.size))

    def test_signal_total_matches_closed_form(self, config, ion1):
        n_pulses = 1_000_000
        records = simulate_decay_records(ion1.emitter, config.protocol, config.detector, n_pulses, 9)
        signal = sum(1 for r in records if r.origin is PhotonOrigin.SIGNAL)
        p_window = emission_window_probability(ion1.emitter.lifetime_us, 1.0, 85.0)
        expected = n_pulses * 0.5 * p_window * config.detector.total_efficiency
        assert abs(signal - expected) < 3.0 * math.sqrt(expected)

    def test_at_most_one_signal_photon_per_pulse(self, config, ion1):
        records = simulate_decay_records(ion1.emitter, config.protocol, config.detector, 300_000, 11)
        signal_pulses = [r.pulse_index for r in records if r.origin is PhotonOrigin.SIGNAL]
        assert len(signal_pulses) == len(set(signal_pulses))

    def test_times_inside_window(self, config, ion1):
        records = simulate_decay_records(ion1.emitter, config.protocol, config.detector, 200_000, 13)
        times = np.array([r.time_in_window_us for r in records])
        assert np.all(times >= 0.0)
        assert np.all(times <= 85.0)

    def test_histogram_covers_window(self, config, ion1):
        hist = simulate_decay_histogram(ion1.emitter, config.protocol, config.detector, 100_000, 1.0, 3)
        assert hist.bin_edges_us[0] == 0.0
        assert hist.bin_edges_us[-1] == pytest.approx(85.0)
        assert hist.counts.sum() > 0


class TestG2:
    def test_single_emitter_zero_lag_is_empty(self, config, ion1):
        hist = simulate_g2_histogram(ion1.emitter, 0.0, config.protocol, 100_000, 10, 21)
        assert hist.coincidences[hist.lags == 0][0] == 0
        assert hist.coincidences[hist.lags != 0].min() > 0

    def test_poissonian_control_normalizes_to_one(self, config, ion1):
        from starksim.analysis import estimate_g2_zero

        hist = simulate_g2_histogram(
            ion1.emitter, 0.0, config.protocol, 100_000, 10, 23, signal_statistics="poissonian"
        )
        estimate = estimate_g2_zero(hist)
        assert estimate.g2_zero == pytest.approx(1.0, abs=3.0 * estimate.standard_error)

    def test_signal_fraction_sets_zero_lag_value(self, config, ion1):
        from starksim.analysis import estimate_g2_zero

        hist = simulate_g2_histogram(ion1.emitter, 1.0 - 0.949, config.protocol, 400_000, 10, 25)
        estimate = estimate_g2_zero(hist)
        assert estimate.g2_zero == pytest.approx(1.0 - 0.949**2, abs=3.5 * estimate.standard_error)

    def test_lag_axis(self, config, ion1):
        hist = simulate_g2_histogram(ion1.emitter, 0.1, config.protocol, 5_000, 4, 2)
        assert list(hist.lags) == list(range(-4, 5))

    def test_background_fraction_bounds(self, config, ion1):
        with pytest.raises(SimulationError):
            simulate_g2_histogram(ion1.emitter, 1.0, config.protocol, 1000, 5, 1)


class TestStarkScan:
    def test_zero_voltage_peak_at_rest_frequency(self, config):
        ion2 = config.simulated_ion("ion2")
        points = simulate_stark_scan(
            ion2, [0.0], config.layout, config.dielectric, config.protocol,
            config.detector, 31, window_half_width_mhz=60.0,
        )
        fit = fit_lorentzian(points[0].scan.frequencies_mhz, points[0].scan.counts)
        assert fit.value("center_mhz") == pytest.approx(-40.0, abs=3.0 * fit.stderr("center_mhz"))
        assert points[0].field.e_parallel_v_per_cm == 0.0

    def test_equally_spaced_voltages_give_equally_spaced_peaks(self, config, ion1):
        points = simulate_stark_scan(
            ion1, [0.0, 111.0, 222.0], config.layout, config.dielectric, config.protocol,
            config.detector, 33,
        )
        centres, errs = [], []
        for point in points:
            fit = fit_lorentzian(point.scan.frequencies_mhz, point.scan.counts)
            centres.append(fit.value("center_mhz"))
            errs.append(fit.stderr("center_mhz"))
        first = centres[1] - centres[0]
        second = centres[2] - centres[1]
        assert first == pytest.approx(second, abs=3.0 * math.hypot(*errs[:2], errs[2]))
        expected = stark_shift_empirical(ion1.model, points[1].field).shift_mhz
        assert first == pytest.approx(expected, abs=3.0 * math.hypot(errs[0], errs[1]))

    def test_voltage_limit_enforced(self, config, ion1):
        with pytest.raises(SimulationError):
            simulate_stark_scan(
                ion1, [400.0], config.layout, config.dielectric, config.protocol,
                config.detector, 1, v_max=333.0,
            )

    def test_scan_windows_track_expected_peak(self, config):
        ion3 = config.simulated_ion("ion3")
        points = simulate_stark_scan(
            ion3, [0.0, 333.0], config.layout, config.dielectric, config.protocol,
            config.detector, 35, window_half_width_mhz=50.0,
        )
        for point in points:
            expected = ion3.model.zero_field_frequency_mhz + stark_shift_empirical(
                ion3.model, point.field
            ).shift_mhz
            freqs = point.scan.frequencies_mhz
            assert freqs[0] <= expected <= freqs[-1]
            assert np.argmax(point.scan.counts) not in (0, freqs.size - 1)


class TestPipelineClosure:
    """Simulate -> fit recovers the configured truth within its own errors."""

    def test_ple_center_and_width_calibrated(self, config, ion1):
        proto = config.protocol.replace_scan(-60.0, 60.0)
        hits = 0
        for seed in range(12):
            scan = simulate_ple_scan(
                [ion1], proto, config.detector, FieldVector(0.0, 0.0), mix_seed(888, seed)
            )
            fit = fit_lorentzian(scan.frequencies_mhz, scan.counts)
            centre_ok = abs(fit.value("center_mhz")) <= 3.0 * fit.stderr("center_mhz")
            width_ok = abs(fit.value("fwhm_mhz") - 6.7) <= 3.0 * fit.stderr("fwhm_mhz")
            hits += centre_ok and width_ok
        assert hits >= 11

    def test_g2_estimate_calibrated(self, config, ion1):
        from starksim.analysis import estimate_g2_zero

        truth = 1.0 - 0.949**2
        hits = 0
        for seed in range(12):
            hist = simulate_g2_histogram(
                ion1.emitter, 1.0 - 0.949, config.protocol, 200_000, 10, mix_seed(999, seed)
            )
            estimate = estimate_g2_zero(hist)
            hits += abs(estimate.g2_zero - truth) <= 3.0 * estimate.standard_error
        assert hits >= 11


class TestCsvRoundTrips:
    def test_ple_csv(self, tmp_path, config, ion1):
        scan = simulate_ple_scan(
            [ion1], config.protocol.replace_scan(-20.0, 20.0), config.detector,
            FieldVector(0.0, 0.0), 41,
        )
        path = tmp_path / "ple_scan.csv"
        write_ple_csv(scan, path)
        freqs, counts, integration = read_ple_csv(path)
        assert np.array_equal(freqs, scan.frequencies_mhz)
        assert np.array_equal(counts, scan.counts)
        assert integration == scan.integration_s

    def test_decay_csv(self, tmp_path, config, ion1):
        hist = simulate_decay_histogram(ion1.emitter, config.protocol, config.detector, 100_000, 1.0, 43)
        path = tmp_path / "decay.csv"
        write_decay_csv(hist, path)
        again = read_decay_csv(path)
        assert np.array_equal(again.counts, hist.counts)
        assert np.allclose(again.bin_edges_us, hist.bin_edges_us)

    def test_g2_csv(self, tmp_path, config, ion1):
        hist = simulate_g2_histogram(ion1.emitter, 0.05, config.protocol, 20_000, 6, 45)
        path = tmp_path / "g2.csv"
        write_g2_csv(hist, path)
        again = read_g2_csv(path)
        assert np.array_equal(again.lags, hist.lags)
        assert np.array_equal(again.coincidences, hist.coincidences)
        header = path.read_text().splitlines()[0]
        assert header == "lag_pulses,coincidences,normalized"
