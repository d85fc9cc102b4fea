"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (collected in the terminal summary) and
then asserts at the stated tolerance.
"""

import math
import time

import numpy as np
import pytest

from sideband_lab.asymmetry import fit_lorentzian, measure_asymmetry, zeta_analytic
from sideband_lab.errors import NumericalError
from sideband_lab.langevin import SimConfig, langevin_psd, slowest_decay_rate
from sideband_lab.model import coupling_for_cooperativity, derive, make_params
from sideband_lab.multitone import (
    Mechanics,
    Occupancies,
    Tone,
    ToneSet,
    amplitude_for_cooperativity,
    ceff_from_frame,
    multitone_psd,
    probe_toneset,
    tone_shift,
)
from sideband_lab.response import exact_transfer, generic_solve, q1_ratio, stability
from sideband_lab.spectrum import Spectrum, bare_mechanical_psd, psd_curve, psd_weak_coupling

from .conftest import GAMMA, KAPPA, OMEGA, random_params, sideband_params

TP = 2 * math.pi

pytestmark = pytest.mark.acceptance


def test_criterion_1_closed_form_matches_linear_solve(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        p = random_params(rng)
        w = rng.uniform(-2, 2, 100) * p.omega_m
        a = exact_transfer(w, p).q
        b = generic_solve(w, p).row("a_r").q
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(b))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 10
    report(1, ok, f"max relative error {worst:.2e} (< 1e-10), {elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_2_zeta_recovery(report):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    gaps = []
    for _ in range(20):
        c_r = rng.uniform(0.002, 0.1)
        c_c = rng.uniform(0.0, 2.0)
        rep = measure_asymmetry(sideband_params(c_r=c_r, c_c=c_c, nbar_mech=rng.uniform(0, 20)))
        gaps.append(rep.relative_gap)
    elapsed = time.perf_counter() - t0
    ok = max(gaps) < 0.05 and elapsed < 60
    report(2, ok, f"max |zeta_emp/zeta_an - 1| = {max(gaps):.2e} over 20 sets (< 5e-2), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_3_zero_point_neutrality(report):
    zetas = [measure_asymmetry(sideband_params(c_r=0.05, c_c=1.0, nbar_mech=n)).zeta_empirical for n in (0, 1, 10)]
    spread = (max(zetas) - min(zetas)) / abs(np.mean(zetas))
    ok = spread < 0.01
    report(3, ok, f"zeta at nbar_B = 0, 1, 10: {', '.join(f'{z:.6f}' for z in zetas)}; spread {spread:.2e} (< 1e-2)")
    assert ok


def _regime_grid():
    om = TP * 1e6
    gam = 1e-5 * om
    for kappa_ratio in (0.01, 0.05):
        kr = kappa_ratio * om
        for c_r in (0.01, 0.03, 0.1):
            for c_c in (0.0, 1.0):
                for sideband, sign in (("minus", -1), ("plus", 1)):
                    gr = coupling_for_cooperativity(c_r, gam, kr)
                    gc = coupling_for_cooperativity(c_c, gam, kr) if c_c else None
                    p = make_params(om, gam, kr, gr, detuning_r=sign * om, kappa_c=kr, g_c=gc, nbar_mech=5.0)
                    yield (kappa_ratio, c_r, c_c, sideband), sign, p


def test_criterion_4_weak_coupling_regime(report):
    worst_curve = (0.0, None)
    worst_lw = (0.0, None)
    worst_lw_full = 0.0
    for label, sign, p in _regime_grid():
        assert p.gamma_m / p.omega_m <= 1e-5 * (1 + 1e-12)
        assert p.readout.g / p.readout.kappa <= 0.05 and p.readout.kappa / p.omega_m <= 0.05
        d = derive(p)
        lw = p.gamma_m * (1 + (d.ceff_plus if sign > 0 else d.ceff_minus))
        center = -sign * p.omega_m
        grid = np.linspace(center - 10 * lw, center + 10 * lw, 801)
        exact = psd_curve(grid, p).values
        approx = psd_weak_coupling(grid, p, label[3]).values
        err = float(np.max(np.abs(approx - exact) / exact))
        # linewidths are read off the shot-removed spectrum, as in the asymmetry pipeline
        fwhm = fit_lorentzian(psd_curve(grid, p, channels=("mechanical", "cooling"))).fwhm
        lw_err = abs(fwhm / lw - 1)
        worst_lw_full = max(worst_lw_full, abs(fit_lorentzian(Spectrum(grid, exact)).fwhm / lw - 1))
        if err > worst_curve[0]:
            worst_curve = (err, label)
        if lw_err > worst_lw[0]:
            worst_lw = (lw_err, label)
    ok_curve = worst_curve[0] < 0.05
    ok_lw = worst_lw[0] < 0.03
    report(
        "4a",
        ok_curve,
        f"weak-coupling vs exact PSD: worst {worst_curve[0]:.3f} (< 0.05) at "
        f"kappa/Omega={worst_curve[1][0]}, C_r={worst_curve[1][1]}, C_c={worst_curve[1][2]}, {worst_curve[1][3]}",
    )
    report("4b", ok_lw, f"fitted linewidth vs Gamma(1+C_eff): worst {worst_lw[0]:.2e} (< 3e-2); "
           f"with the shot term left in, {worst_lw_full:.2e}")
    assert ok_lw
    assert ok_curve


def test_criterion_5_q1_ratio(report):
    bare = make_params(OMEGA, GAMMA, KAPPA, 0.0, kappa_c=KAPPA, g_c=0.0)
    r0 = q1_ratio(bare)
    coupled = sideband_params(c_r=0.1, c_c=1.0, detuning_r=0.0)
    r1 = q1_ratio(coupled)
    rng_states = [np.random.default_rng(s).uniform() for s in range(3)]  # perturb any global state
    repeats = [q1_ratio(coupled) for _ in rng_states]
    # independent route through the direct linear solve
    row = generic_solve(np.array([OMEGA, -OMEGA]), coupled).row("a_r")
    r_solve = abs(row.c[0, 0] / row.c[1, 0])
    ok_bare = abs(r0 - 1) < 1e-12
    ok_dev = abs(r1 - 1) > 1e-6 and all(r == r1 for r in repeats) and abs((r1 - 1) / (r_solve - 1) - 1) < 1e-8
    report(5, ok_bare and ok_dev, f"uncoupled |ratio - 1| = {abs(r0 - 1):.1e}; coupled ratio - 1 = {r1 - 1:.9e} "
           f"(direct solve {r_solve - 1:.9e})")
    assert ok_bare and ok_dev


def test_criterion_6_ordering_structure(report):
    ratio_err = 0.0
    for nbar in (0, 1, 3, 10):
        s = bare_mechanical_psd(np.array([-1.0, 1.0]), 1.0, 1e-6, nbar, "normal")
        ratio_err = max(ratio_err, abs(s.values[0] / s.values[1] - nbar / (nbar + 1)))
    curves = []
    for nbar in (0, 1, 3, 10):
        grid = np.linspace(-1.5, 1.5, 601)
        curves.append({o: bare_mechanical_psd(grid, 1.0, 1e-2, nbar, o).values for o in ("normal", "symmetric", "antinormal")})
    for sign in (-1, 1):
        p = sideband_params(c_r=0.05, c_c=1.0, detuning_r=sign * OMEGA)
        grid = np.linspace(-1.2, 1.2, 1201) * OMEGA
        curves.append({o: psd_curve(grid, p, o).values for o in ("normal", "symmetric", "antinormal")})
    for seed in range(5):
        p = random_params(np.random.default_rng(seed))
        grid = np.linspace(-2, 2, 401) * p.omega_m
        curves.append({o: psd_curve(grid, p, o).values for o in ("normal", "symmetric", "antinormal")})
    violating = 0
    worst_neg = 0.0
    for c in curves:
        tol = 1e-12 * c["antinormal"].max()
        if np.any(c["normal"] > c["symmetric"] + tol) or np.any(c["symmetric"] > c["antinormal"] + tol):
            violating += 1
        for v in c.values():
            worst_neg = min(worst_neg, float(v.min() / v.max()))
    ok_ratio = ratio_err < 1e-9
    ok_sandwich = violating == 0
    ok_pos = worst_neg >= -1e-12
    report("6a", ok_ratio, f"bare normal-ordered peak ratio vs nbar/(nbar+1): max error {ratio_err:.1e} (< 1e-9)")
    report("6b", ok_sandwich, f"normal <= symmetric <= antinormal pointwise: violated on {violating}/{len(curves)} curves")
    report("6c", ok_pos, f"positivity: min value / max = {worst_neg:.1e} (>= -1e-12)")
    assert ok_ratio and ok_pos
    assert ok_sandwich


MECH = Mechanics(TP * 1e6, TP * 10)
WCAV = TP * 20e6
KAP = TP * 50e3
G0 = TP * 1.0


def test_criterion_7_multitone(report):
    worst = 0.0
    for detuning in (-1.0, 0.0, 1.0):
        f = WCAV + detuning * MECH.omega_m
        amp = amplitude_for_cooperativity(0.2, f, KAP, WCAV, G0, MECH.gamma_m)
        ts = ToneSet(G0, KAP, WCAV, (Tone(f, amp),))
        g = tone_shift(ts, MECH).couplings[0]
        p = make_params(MECH.omega_m, MECH.gamma_m, KAP, g, detuning_r=detuning * MECH.omega_m, nbar_mech=3, nbar_r=0.5)
        grid = np.linspace(-1.2, 1.2, 1201) * MECH.omega_m
        a = multitone_psd(grid, ts, MECH, Occupancies(0.5, 3), truncation=0, ref=(1,)).values
        b = psd_curve(grid, p).values
        worst = max(worst, float(np.max(np.abs(a - b) / b)))
    ok_reduce = worst < 1e-8

    delta, delta_c = 20 * MECH.gamma_m, 200 * MECH.gamma_m
    ts = probe_toneset(WCAV, KAP, G0, MECH, delta, 0.05, 0.05, delta_c, 1.0)
    cp, cm = ceff_from_frame(tone_shift(ts, MECH), MECH)
    fits = {}
    for name, sign, ce in (("plus", 1, cp), ("minus", -1, cm)):
        lw = MECH.gamma_m * (1 + ce)
        center = WCAV + sign * delta
        grid = np.linspace(center - 8 * lw, center + 8 * lw, 641)
        spec = multitone_psd(grid, ts, MECH, Occupancies(0, 5), truncation=0, channels=("mechanical",))
        fits[name] = (fit_lorentzian(spec), lw)
    lw_err = max(abs(r.fwhm / lw - 1) for r, lw in fits.values())
    imbalance = fits["plus"][0].area_quad / fits["minus"][0].area_quad - 1
    # the less damped sideband (smaller C_eff) carries more weight
    ok_sign = imbalance != 0 and np.sign(imbalance) == np.sign(cm - cp)
    ok_lw = lw_err < 0.03
    report("7a", ok_reduce, f"single-tone lattice vs two-mode PSD: max relative error {worst:.1e} (< 1e-8)")
    report("7b", ok_lw, f"probe linewidths vs Gamma(1+C_eff+-), truncation 0: worst {lw_err:.1e} (< 3e-2)")
    report("7c", ok_sign, f"area imbalance I+/I- - 1 = {imbalance:+.4f}; C_eff+ = {cp:+.4f}, C_eff- = {cm:+.4f}")
    assert ok_reduce and ok_lw and ok_sign


def _reference_params(detuning_sign=-1, g_r_hz=500.0):
    om, gam, kr = TP * 1e6, TP * 10.0, TP * 50e3
    gc = coupling_for_cooperativity(1.0, gam, kr)
    return make_params(om, gam, kr, TP * g_r_hz, detuning_r=detuning_sign * om, g_c=gc, nbar_mech=5.0)


SHOT_REMOVED = ("mechanical", "cooling")


def _langevin_window(p, duration, seed, halfwidths, channels=None):
    h = math.pi / (1.25 * p.omega_m)
    seg = int(round(1.0 / h))
    lw = slowest_decay_rate(p)
    cfg = SimConfig(dt=h, duration=duration, seed=seed, burn_in=max(0.1, 20 / lw), integrator="exact",
                    chunk_steps=1 << 20, channels=channels)
    est = langevin_psd(p, cfg, seg, 0.5)
    center = -np.sign(p.readout.detuning) * p.omega_m
    return est.window(center - halfwidths * lw, center + halfwidths * lw)


@pytest.mark.slow
def test_criterion_8_langevin_cross_oracle(report):
    t0 = time.perf_counter()
    p = _reference_params(-1)
    win = _langevin_window(p, 20.0, 1, 5)
    exact = psd_curve(win.spectrum.grid, p).values
    z = (win.spectrum.values - exact) / win.stderr
    frac = float(np.mean(np.abs(z) < 3))
    elapsed = time.perf_counter() - t0
    ok_bins = frac >= 0.95

    # the plus sideband of the reference set sits exactly on the instability
    # threshold (C_r = 1 + C_c), so neither zeta nor its Langevin estimate exist
    try:
        z_an = zeta_analytic(p)
        win_p = _langevin_window(_reference_params(+1), 20.0, 2, 10, SHOT_REMOVED)
        win_m = _langevin_window(p, 20.0, 3, 10, SHOT_REMOVED)
        z_lv = fit_lorentzian(win_p.spectrum).area_quad / fit_lorentzian(win_m.spectrum).area_quad - 1
        ok_zeta = abs(z_lv / z_an - 1) < 0.10
        zeta_detail = f"zeta_langevin {z_lv:.4f} vs analytic {z_an:.4f}"
    except NumericalError as exc:
        ok_zeta = False
        zeta_detail = f"not attainable: {type(exc).__name__}: {exc}"
    report("8a", ok_bins, f"{frac:.3f} of {z.size} bins within 3 SE (>= 0.95), mean z {z.mean():+.2f}, {elapsed:.0f} s")
    report("8b", ok_zeta, f"zeta from Langevin areas within 10%: {zeta_detail}")
    assert ok_bins
    assert ok_zeta


@pytest.mark.slow
def test_langevin_zeta_below_threshold(report):
    # supplementary: the same reference machinery with C_r = 0.5, where zeta exists.
    # Each area carries ~1/sqrt(Gamma_eff T) relative scatter and zeta amplifies the
    # ratio error by (1 + zeta)/zeta = 2.5, so 80 s per sideband puts 1 sigma near 5%.
    t0 = time.perf_counter()
    g_r = 250.0
    p_minus = _reference_params(-1, g_r)
    z_an = zeta_analytic(p_minus)
    areas = {}
    for name, sign, seed in (("plus", 1, 11), ("minus", -1, 12)):
        # shot removal by channel exclusion, as in the frequency-domain pipeline
        win = _langevin_window(_reference_params(sign, g_r), 80.0, seed, 10, SHOT_REMOVED)
        areas[name] = fit_lorentzian(win.spectrum).area_quad
    z_lv = areas["plus"] / areas["minus"] - 1
    ok = abs(z_lv / z_an - 1) < 0.10
    report("8 (supplementary, C_r = 0.5)", ok,
           f"zeta_langevin {z_lv:.4f} vs analytic {z_an:.4f}, {time.perf_counter() - t0:.0f} s")
    assert ok


def test_criterion_9_stability_flip(report):
    c_c = 1.0
    step = 0.01
    grid = np.round(np.arange(1.5, 2.5 + step / 2, step), 10)
    flags = [stability(sideband_params(c_r=c, c_c=c_c, detuning_r=OMEGA)).stable for c in grid]
    flips = [k for k in range(1, len(flags)) if flags[k] != flags[k - 1]]
    ok = len(flips) == 1 and flags[0] and abs(grid[flips[0]] - (1 + c_c)) <= step + 1e-12
    where = f"{grid[flips[0] - 1]:.2f} -> {grid[flips[0]]:.2f}" if flips else "none"
    report(9, ok, f"stable -> unstable between C_r = {where}; expected 1 + C_c = {1 + c_c:.2f} (step {step})")
    assert ok
