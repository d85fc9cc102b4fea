import math

import numpy as np
import pytest

from sideband_lab.errors import StepTooLarge, TooFewSamples, UnstableSystem, ValidationError
from sideband_lab.langevin import (
    SimConfig,
    estimate_psd,
    langevin_psd,
    read_record,
    simulate,
    write_record,
)
from sideband_lab.model import make_params
from sideband_lab.spectrum import psd_curve

from .conftest import sideband_params

TP = 2 * math.pi


def _cavity(nbar=0.0, detuning=-0.3):
    return make_params(1.0, 0.1, 0.5, 0.0, detuning_r=detuning, nbar_r=nbar)


def test_zero_noise_zero_state_stays_zero():
    cfg = SimConfig(dt=0.01, duration=5.0, noise=False, check_invariants=False)
    tr = simulate(_cavity(), cfg)
    assert np.all(tr.a_r == 0) and np.all(tr.b == 0)


@pytest.mark.parametrize("integrator, dt", [("exact", 0.05), ("euler", 1e-4)])
def test_damped_mechanics_decay(integrator, dt):
    p = _cavity()
    cfg = SimConfig(dt=dt, duration=5 / p.gamma_m, noise=False, initial=(1.0,), integrator=integrator,
                    check_invariants=False, record_every=int(round(0.5 / dt)))
    tr = simulate(p, cfg)
    expected = np.exp(-0.5 * p.gamma_m * tr.t)
    np.testing.assert_allclose(np.abs(tr.b[0]), expected, rtol=1e-2)


def test_decoupled_cavity_occupancy():
    nbar = 0.8
    p = _cavity(nbar)
    # samples 20/kappa apart are effectively independent
    cfg = SimConfig(dt=0.5, duration=2e5, seed=4, burn_in=200.0, integrator="exact", record_every=80)
    tr = simulate(p, cfg)
    occ = np.abs(tr.a_r[0]) ** 2
    se = occ.std(ddof=1) / math.sqrt(occ.size)
    assert abs(occ.mean() - (nbar + 0.5) / TP) < 3 * se


def test_white_noise_estimate_is_flat():
    rng = np.random.default_rng(0)
    fs, sigma = 100.0, 0.7
    x = sigma * rng.standard_normal((8, 4096))
    est = estimate_psd(x, fs, 256, 0.5)
    density = sigma**2 / fs
    assert abs(est.spectrum.values.mean() - density) < 2 * est.stderr.mean() / math.sqrt(est.stderr.size)
    assert np.mean(np.abs(est.spectrum.values - density) < 3 * est.stderr) > 0.95


def test_sinusoid_peaks_at_its_frequency():
    fs, f0 = 1000.0, 125.0
    t = np.arange(8192) / fs
    est = estimate_psd(np.cos(TP * f0 * t), fs, 1024, 0.5)
    k = np.argmax(est.spectrum.values)
    assert abs(est.spectrum.grid[k]) == pytest.approx(TP * f0)


def test_estimator_errors():
    with pytest.raises(TooFewSamples):
        estimate_psd(np.zeros(100), 1.0, 200)
    with pytest.raises(ValidationError):
        estimate_psd(np.zeros(100), 1.0, 50, overlap=0.95)


def test_decoupled_cavity_psd_matches_frequency_domain():
    p = _cavity(0.3)
    cfg = SimConfig(dt=0.5, duration=4e5, seed=2, burn_in=200.0, integrator="exact")
    est = langevin_psd(p, cfg, 1024, 0.5)
    w = est.window(0.2, 0.4)
    exact = psd_curve(w.spectrum.grid, p).values
    peak = np.argmin(np.abs(w.spectrum.grid - 0.3))
    assert w.spectrum.values[peak] == pytest.approx(exact[peak], rel=0.05)
    assert np.mean(np.abs(w.spectrum.values - exact) < 3 * w.stderr) > 0.9


def test_seed_determinism():
    p = make_params(1.0, 0.01, 0.1, 0.01, detuning_r=-1.0, nbar_mech=2.0)
    cfg = SimConfig(dt=0.02, duration=50.0, seed=9, check_invariants=False)
    a, b = simulate(p, cfg), simulate(p, cfg)
    np.testing.assert_array_equal(a.a_r, b.a_r)
    c = simulate(p, SimConfig(dt=0.02, duration=50.0, seed=10, check_invariants=False))
    assert not np.array_equal(a.a_r, c.a_r)
    assert a.meta["rng"].startswith("numpy-Philox")


def test_config_checks():
    p = _cavity()
    with pytest.raises(StepTooLarge):
        simulate(p, SimConfig(dt=0.1, duration=1.0, check_invariants=False))
    with pytest.raises(ValidationError):
        simulate(p, SimConfig(dt=0.01, duration=1.0, burn_in=0.0))
    with pytest.raises(UnstableSystem):
        simulate(sideband_params(c_r=2.5, c_c=1.0, detuning_r=2 * math.pi * 1e6), SimConfig(dt=1e-9, duration=1e-6))


def test_record_round_trip(tmp_path):
    t = np.linspace(0, 1, 11)
    z = np.exp(1j * t)
    path = tmp_path / "rec.bin"
    write_record(path, t, z)
    rows = read_record(path)
    np.testing.assert_array_equal(rows[:, 0], t)
    np.testing.assert_allclose(rows[:, 1], 2 * np.cos(t))
    assert np.all(rows[:, 2] == 0)
