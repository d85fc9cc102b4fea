import json
import math

import numpy as np
import pytest

from sideband_lab.asymmetry import fit_lorentzian
from sideband_lab.errors import SystemTooLarge
from sideband_lab.model import make_params
from sideband_lab.multitone import (
    Mechanics,
    Occupancies,
    Tone,
    ToneSet,
    amplitude_for_cooperativity,
    build_harmonic_system,
    ceff_from_frame,
    ceff_multitone,
    coherent_spurs,
    lattice_nodes,
    multitone_psd,
    probe_toneset,
    tone_shift,
    toneset_from_dict,
    toneset_to_dict,
)
from sideband_lab.spectrum import psd_curve

TP = 2 * math.pi
MECH = Mechanics(TP * 1e6, TP * 10)
KAP = TP * 50e3
WCAV = TP * 20e6
G0 = TP * 1.0
DELTA = 20 * MECH.gamma_m
DELTA_C = 200 * MECH.gamma_m


def test_zero_amplitudes_give_zero_shift():
    ts = ToneSet(G0, KAP, WCAV, (Tone(WCAV + 1.0, 0j), Tone(WCAV - 1.0, 0j)))
    fr = tone_shift(ts, MECH)
    assert np.all(fr.alpha == 0) and fr.beta == 0


def test_resonant_tone_alpha():
    s = 3.0 + 1.0j
    fr = tone_shift(ToneSet(G0, KAP, WCAV, (Tone(WCAV, s),)), MECH)
    assert fr.alpha[0] == pytest.approx(-2j * s / KAP)


def test_beta_doubles_for_two_equal_tones():
    one = tone_shift(ToneSet(G0, KAP, WCAV, (Tone(WCAV + 5.0, 2.0),)), MECH)
    two = tone_shift(ToneSet(G0, KAP, WCAV, (Tone(WCAV + 5.0, 2.0), Tone(WCAV - 5.0, 2.0))), MECH)
    assert abs(two.beta) == pytest.approx(2 * abs(one.beta))


def test_lattice_counts():
    # order 0: A, n B, n B~, n A~; three tones at orders 0, 1, 2
    assert [len(lattice_nodes(3, t)) for t in (0, 1, 2)] == [10, 49, 109]
    assert len(lattice_nodes(1, 5)) == 4


def test_system_too_large():
    with pytest.raises(SystemTooLarge):
        lattice_nodes(4, 3, cap=100)


@pytest.mark.parametrize("detuning", [1.0, -1.0, 0.3])
def test_single_tone_reduces_to_two_mode(detuning):
    f = WCAV + detuning * MECH.omega_m
    amp = amplitude_for_cooperativity(0.2, f, KAP, WCAV, G0, MECH.gamma_m)
    ts = ToneSet(G0, KAP, WCAV, (Tone(f, amp),))
    g = tone_shift(ts, MECH).couplings[0]
    p = make_params(MECH.omega_m, MECH.gamma_m, KAP, g, detuning_r=detuning * MECH.omega_m, nbar_mech=3, nbar_r=0.5)
    grid = np.linspace(-1.2, 1.2, 1201) * MECH.omega_m
    a = multitone_psd(grid, ts, MECH, Occupancies(0.5, 3), truncation=0, ref=(1,)).values
    b = psd_curve(grid, p).values
    np.testing.assert_allclose(a, b, rtol=1e-8)


def test_single_tone_matrix_matches_two_mode_matrix():
    from sideband_lab.response import system_matrix

    f = WCAV - MECH.omega_m
    amp = amplitude_for_cooperativity(0.1, f, KAP, WCAV, G0, MECH.gamma_m)
    ts = ToneSet(G0, KAP, WCAV, (Tone(f, amp),))
    fr = tone_shift(ts, MECH)
    w = 0.3 * MECH.omega_m
    hs = build_harmonic_system(f + w, fr, MECH, 0)
    p = make_params(MECH.omega_m, MECH.gamma_m, KAP, fr.couplings[0], detuning_r=-MECH.omega_m)
    m2 = system_matrix(w, p)[0]
    # two-mode unknown order (b, b~, a, a~) against lattice nodes
    names = {"B": 0, "Bt": 1, "A": 2, "At": 3}
    perm = [hs.index[(fld, n)] for fld, n in sorted(hs.nodes, key=lambda node: names[node[0]])]
    np.testing.assert_allclose(hs.matrix[0][np.ix_(perm, perm)], m2[:4, :4], rtol=1e-12, atol=1e-6)


def test_zero_g0_is_bare_cavity():
    ts = ToneSet(0.0, KAP, WCAV, (Tone(WCAV + 1e3, 1.0),))
    grid = WCAV + np.linspace(-3, 3, 61) * KAP
    s = multitone_psd(grid, ts, MECH, Occupancies(0.0, 5.0), truncation=0)
    bare = (KAP / TP) * 0.5 * np.abs(1 / (grid - WCAV + 0.5j * KAP)) ** 2
    # the adjoint partner at -w is 2 omega_cav away and negligible
    np.testing.assert_allclose(s.values, bare, rtol=1e-4)


def test_ceff_limits():
    cp, cm = ceff_multitone(0.05, 0.05, 1.0, MECH.gamma_m, 1e6 * MECH.gamma_m, 1e7 * MECH.gamma_m)
    assert cp == pytest.approx(-0.05, rel=1e-6) and cm == pytest.approx(0.05, rel=1e-6)
    cp, cm = ceff_multitone(0.05, 0.05, 1.0, MECH.gamma_m, 0.0, 3 * MECH.gamma_m)
    assert cp == pytest.approx(cm)
    assert cp == pytest.approx(1.0 / 37)


def test_ceff_reference_values():
    cp, cm = ceff_multitone(0.05, 0.05, 1.0, 1.0, 20.0, 200.0)
    assert cp == pytest.approx(1 / (4 * 220**2 + 1) - 0.05 + 0.05 / 6401, rel=1e-12)
    assert cm == pytest.approx(1 / (4 * 180**2 + 1) + 0.05 - 0.05 / 6401, rel=1e-12)
    assert cp != cm


@pytest.fixture(scope="module")
def probes():
    return probe_toneset(WCAV, KAP, G0, MECH, DELTA, 0.05, 0.05, DELTA_C, 1.0)


def _fit(ts, sign, lw, truncation):
    center = WCAV + sign * DELTA
    grid = np.linspace(center - 8 * lw, center + 8 * lw, 641)
    spec = multitone_psd(grid, ts, MECH, Occupancies(0, 5), truncation=truncation, channels=("mechanical",))
    return fit_lorentzian(spec)


def test_truncation_zero_linewidths_follow_effective_cooperativity(probes):
    cp, cm = ceff_from_frame(tone_shift(probes, MECH), MECH)
    plus = _fit(probes, 1, MECH.gamma_m * (1 + cp), 0)
    minus = _fit(probes, -1, MECH.gamma_m * (1 + cm), 0)
    assert plus.fwhm == pytest.approx(MECH.gamma_m * (1 + cp), rel=3e-3)
    assert minus.fwhm == pytest.approx(MECH.gamma_m * (1 + cm), rel=3e-3)
    assert plus.area_quad > minus.area_quad


def test_truncation_converges_from_order_one(probes):
    lw = 2 * MECH.gamma_m
    a1 = _fit(probes, 1, lw, 1).area_quad
    a2 = _fit(probes, 1, lw, 2).area_quad
    assert a2 == pytest.approx(a1, rel=1e-3)


def test_order_one_adds_cross_tone_damping(probes):
    # the resonant cross-tone paths damp the mechanics for both probes
    c = tone_shift(probes, MECH).cooperativities(MECH)
    expected = MECH.gamma_m * (1 + c[2] + c[1] - c[0])
    for sign in (1, -1):
        assert _fit(probes, sign, expected, 1).fwhm == pytest.approx(expected, rel=2e-2)


def test_cooling_only_linewidth():
    ts = probe_toneset(WCAV, KAP, G0, MECH, DELTA, 0.0, 0.0, DELTA_C, 1.0)
    ts = ToneSet(ts.g0, ts.kappa, ts.omega_cav, ts.tones[2:], ts.delta, ts.delta_c)
    center = WCAV - DELTA_C
    lw = 2 * MECH.gamma_m
    grid = np.linspace(center - 8 * lw, center + 8 * lw, 641)
    spec = multitone_psd(grid, ts, MECH, Occupancies(0, 5), truncation=1, channels=("mechanical",))
    assert fit_lorentzian(spec).fwhm == pytest.approx(lw, rel=1e-2)


def test_spurs_single_and_pair():
    assert coherent_spurs(ToneSet(G0, KAP, WCAV, (Tone(WCAV, 1.0),)), MECH) == []
    ts = ToneSet(G0, KAP, WCAV, (Tone(WCAV + 100.0, 1e3), Tone(WCAV - 100.0, 1e3)))
    spurs = coherent_spurs(ts, MECH)
    freqs = sorted(round(s.freq - WCAV) for s in spurs)
    assert freqs == [-300, -100, 100, 300]
    assert all(s.power > 0 for s in spurs)


def test_toneset_json_round_trip():
    ts = probe_toneset(WCAV, KAP, G0, MECH, DELTA, 0.05, 0.02, DELTA_C, 1.0)
    doc = toneset_to_dict(ts)
    again = toneset_to_dict(toneset_from_dict(json.loads(json.dumps(doc))))
    assert again == doc
