import math

import numpy as np
import pytest

from cavqed import dynamics, fitkit, hilbert, trajectories
from cavqed.polariton import SystemParams, purcell_lifetime
from cavqed.trajectories import PulseConfig, run_cw, run_pulsed
from cavqed.units import Detuning

TWO_PI = 2 * math.pi
RES = Detuning.zero(942.5)

TWO_LEVEL = SystemParams(g_GHz=0.0, gamma_x_GHz=0.15, gamma_m_GHz=24.1,
                         gamma_b_GHz=0.15, pump_GHz=0.01, n_max=1)


def test_reproducible_streams():
    a = run_cw(TWO_LEVEL, RES, duration_ns=2e4, seed=42)
    b = run_cw(TWO_LEVEL, RES, duration_ns=2e4, seed=42)
    assert np.array_equal(a.times_ns, b.times_ns)
    assert np.array_equal(a.channel_codes, b.channel_codes)
    c = run_cw(TWO_LEVEL, RES, duration_ns=2e4, seed=43)
    assert not np.array_equal(a.times_ns, c.times_ns)


def test_parallel_chunks_reproduce_serial_merge():
    serial = run_cw(TWO_LEVEL, RES, duration_ns=5e3, seed=7, n_trajectories=4)
    first = run_cw(TWO_LEVEL, RES, duration_ns=5e3, seed=7, n_trajectories=2)
    second = run_cw(TWO_LEVEL, RES, duration_ns=5e3, seed=7, n_trajectories=2,
                    first_trajectory=2)
    times = np.concatenate([first.times_ns, second.times_ns])
    order = np.argsort(times, kind="stable")
    assert np.array_equal(times[order], serial.times_ns)


def test_cw_click_rate_matches_steady_state():
    duration = 1e6
    stream = run_cw(TWO_LEVEL, RES, duration_ns=duration, seed=42)
    n = stream.times("exciton_radiative").size
    pop = 0.01 / 0.16
    expected = pop * TWO_PI * 0.15 * duration
    assert abs(n - expected) < 3.0 * math.sqrt(expected)


def test_no_pump_rejected():
    p = SystemParams(pump_GHz=0.0)
    with pytest.raises(ValueError):
        run_cw(p, RES, duration_ns=100.0, seed=1)


def test_ensemble_matches_master_equation():
    p = SystemParams(g_GHz=18.4, gamma_x_GHz=8.5, gamma_m_GHz=24.1,
                     gamma_b_GHz=0.015, pump_GHz=0.05, n_max=1)
    model = dynamics.build_model(p, RES)
    sp = model.space
    t = np.linspace(0.0, 2.0, 11)
    mean, err = trajectories.ensemble_populations(
        p, RES, sp.projectors["exciton"], t, n_trajectories=3000, seed=11)
    rho0 = np.outer(sp.ket(hilbert.GROUND, 0), sp.ket(hilbert.GROUND, 0).conj())
    rhos = dynamics.evolve(rho0, p, t, model=model)
    exact = np.array([dynamics.expectation(sp.projectors["exciton"], r)
                      for r in rhos])
    z = np.abs(mean[1:] - exact[1:]) / np.maximum(err[1:], 1e-12)
    assert np.max(z) < 4.0


class TestPulsed:
    def test_single_photon_regime_is_bernoulli(self):
        p = SystemParams(g_GHz=0.0, gamma_x_GHz=0.2, gamma_m_GHz=24.1,
                         gamma_b_GHz=0.2, pump_GHz=0.0, n_max=1,
                         lambda_x_nm=946.6)
        cfg = PulseConfig(rep_rate_MHz=40, mean_captures_per_pulse=0.3,
                          capture_delay_ns=0.06, n_pulses=10000,
                          allow_recapture=False)
        s = run_pulsed(p, Detuning.from_nm(4.1, 942.5), cfg, seed=3)
        x = s.times("exciton_radiative")
        per_pulse = np.bincount((x // cfg.rep_period_ns).astype(int),
                                minlength=cfg.n_pulses)
        assert per_pulse.max() == 1
        frac = per_pulse.mean()
        want = 1 - math.exp(-0.3)
        # decay window loses the tail beyond one period
        assert frac == pytest.approx(want, rel=0.1)

    def test_recapture_allows_multiple_clicks(self):
        p = SystemParams(g_GHz=20.7, gamma_x_GHz=8.5, gamma_m_GHz=24.1,
                         gamma_b_GHz=0.015, pump_GHz=0.0, n_max=3)
        cfg = PulseConfig(rep_rate_MHz=80, mean_captures_per_pulse=1.0,
                          capture_delay_ns=0.06, n_pulses=4000)
        s = run_pulsed(p, RES, cfg, seed=11)
        m = s.times("cavity_loss")
        per_pulse = np.bincount((m // cfg.rep_period_ns).astype(int),
                                minlength=cfg.n_pulses)
        assert per_pulse.max() >= 2

    def test_resonant_decay_is_capture_limited(self):
        p = SystemParams(g_GHz=20.7, gamma_x_GHz=8.5, gamma_m_GHz=24.1,
                         gamma_b_GHz=0.015, pump_GHz=0.0, n_max=3)
        cfg = PulseConfig(rep_rate_MHz=80, mean_captures_per_pulse=1.0,
                          capture_delay_ns=0.060, n_pulses=15000)
        s = run_pulsed(p, RES, cfg, seed=11)
        h = trajectories.lifetime_from_clicks(s, "cavity_loss",
                                              cfg.rep_period_ns, bin_ns=0.01)
        # fit the tail beyond the ~10 ps polariton response: capture-limited
        sel = (h.centers_ns > 0.1) & (h.centers_ns < 1.5)
        fit = fitkit.fit_decay((h.centers_ns[sel], h.counts[sel]), "mono")
        assert fit.params["tau_ns"] == pytest.approx(0.060, rel=0.1)

    def test_detuned_decay_matches_purcell_lifetime(self):
        det = Detuning.from_nm(4.1, 942.5)
        p = SystemParams(lambda_x_nm=946.6, g_GHz=20.7, gamma_x_GHz=0.015,
                         gamma_m_GHz=24.1, gamma_b_GHz=0.015, pump_GHz=0.0,
                         n_max=1)
        want = purcell_lifetime(p, det).tau_ns
        cfg = PulseConfig(rep_rate_MHz=40, mean_captures_per_pulse=0.8,
                          capture_delay_ns=0.06, n_pulses=12000)
        s = run_pulsed(p, det, cfg, seed=19)
        times = np.sort(np.concatenate([s.times("exciton_radiative"),
                                        s.times("cavity_loss")]))
        merged = trajectories.ClickStream(times, np.zeros(times.size, np.int16),
                                          ("pl",), s.duration_ns)
        h = trajectories.lifetime_from_clicks(merged, "pl", cfg.rep_period_ns,
                                              bin_ns=0.25)
        fit = fitkit.fit_decay(h, "mono", fix_t0=0.0)
        assert fit.params["tau_ns"] == pytest.approx(want, rel=0.1)

    def test_feeder_mode_lifetime(self):
        rate = 1.0 / (TWO_PI * 1.3)
        p = SystemParams(lambda_x_nm=946.6, g_GHz=0.0, gamma_x_GHz=0.015,
                         gamma_m_GHz=24.1, gamma_b_GHz=0.015, pump_GHz=0.0,
                         n_max=1, emitter_levels=3, feeder_decay_GHz=rate)
        cfg = PulseConfig(rep_rate_MHz=40, mean_captures_per_pulse=0.8,
                          capture_delay_ns=0.06, n_pulses=12000,
                          capture_target="feeder")
        s = run_pulsed(p, Detuning.from_nm(4.1, 942.5), cfg, seed=5)
        h = trajectories.lifetime_from_clicks(s, "cavity_loss",
                                              cfg.rep_period_ns, bin_ns=0.1)
        fit = fitkit.fit_decay(h, "mono", fix_t0=0.0)
        assert fit.params["tau_ns"] == pytest.approx(1.3, rel=0.1)


class TestLifetimeHistogram:
    def test_synthetic_exponential_recovery(self):
        rng = np.random.default_rng(0)
        times = np.sort(rng.exponential(7.6, size=20000))
        s = trajectories.ClickStream(times, np.zeros(times.size, np.int16),
                                     ("pl",), float(times[-1] + 1))
        h = trajectories.lifetime_from_clicks(s, "pl", rep_period_ns=100.0,
                                              bin_ns=0.25)
        fit = fitkit.fit_decay(h, "mono", fix_t0=0.0)
        assert fit.params["tau_ns"] == pytest.approx(7.6, rel=0.02)

    def test_uniform_clicks_flat_histogram(self):
        rng = np.random.default_rng(1)
        times = np.sort(rng.uniform(0, 1e5, size=50000))
        s = trajectories.ClickStream(times, np.zeros(times.size, np.int16),
                                     ("pl",), 1e5)
        h = trajectories.lifetime_from_clicks(s, "pl", rep_period_ns=25.0,
                                              bin_ns=0.5)
        mean = h.counts.mean()
        assert np.all(np.abs(h.counts - mean) < 5 * math.sqrt(mean))

    def test_empty_channel_rejected(self):
        s = trajectories.ClickStream(np.array([1.0]), np.array([0], np.int16),
                                     ("cavity_loss", "exciton_radiative"), 10.0)
        with pytest.raises(ValueError):
            trajectories.lifetime_from_clicks(s, "exciton_radiative", 25.0)


def test_click_stream_accessors():
    s = trajectories.ClickStream(np.array([0.5, 1.0, 2.0]),
                                 np.array([0, 1, 0], np.int16),
                                 ("cavity_loss", "exciton_radiative"), 10.0)
    assert list(s.times("cavity_loss")) == [0.5, 2.0]
    assert s.counts() == {"cavity_loss": 2, "exciton_radiative": 1}
    recs = list(s.records())
    assert recs[1].channel == "exciton_radiative"
    with pytest.raises(KeyError):
        s.times("nope")


def test_pulse_config_validation():
    with pytest.raises(ValueError):
        PulseConfig(rep_rate_MHz=0)
    with pytest.raises(ValueError):
        PulseConfig(mean_captures_per_pulse=0)
    with pytest.raises(ValueError):
        PulseConfig(capture_target="nowhere")
    assert PulseConfig(rep_rate_MHz=40).rep_period_ns == pytest.approx(25.0)
