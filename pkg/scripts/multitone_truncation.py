"""Probe-sideband linewidths and areas against harmonic truncation order.

Two equal probes detuned by +-delta from the mechanical sidebands, plus a
cooling tone. Order 0 keeps only the tone-resonant paths; higher orders add
the cross-tone paths that share mechanical damping between the probes.
"""

import argparse
import math
import warnings

import numpy as np

from sideband_lab.asymmetry import fit_lorentzian
from sideband_lab.errors import RegimeWarning
from sideband_lab.multitone import Mechanics, Occupancies, ceff_from_frame, multitone_psd, probe_toneset, tone_shift


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c-probe", type=float, default=0.05)
    ap.add_argument("--c-cool", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=20.0, help="probe offset in units of Gamma")
    ap.add_argument("--delta-c", type=float, default=200.0, help="cooling offset in units of Gamma")
    ap.add_argument("--orders", default="0,1,2")
    args = ap.parse_args()

    tp = 2 * math.pi
    mech = Mechanics(tp * 1e6, tp * 10)
    wcav, kap, g0 = tp * 20e6, tp * 50e3, tp * 1.0
    delta, delta_c = args.delta * mech.gamma_m, args.delta_c * mech.gamma_m
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        ts = probe_toneset(wcav, kap, g0, mech, delta, args.c_probe, args.c_probe, delta_c, args.c_cool)
        cp, cm = ceff_from_frame(tone_shift(ts, mech), mech)
    print(f"C_eff+ = {cp:+.5f}   C_eff- = {cm:+.5f}")
    print(f"{'order':>5} {'fwhm+/G':>9} {'fwhm-/G':>9} {'I+/I- - 1':>10}")
    for order in map(int, args.orders.split(",")):
        fits = {}
        for name, sign in (("plus", 1), ("minus", -1)):
            lw = mech.gamma_m * 2
            center = wcav + sign * delta
            grid = np.linspace(center - min(10 * lw, 0.9 * delta), center + min(10 * lw, 0.9 * delta), 801)
            spec = multitone_psd(grid, ts, mech, Occupancies(0, 5), truncation=order, channels=("mechanical",))
            fits[name] = fit_lorentzian(spec)
        imb = fits["plus"].area_quad / fits["minus"].area_quad - 1
        print(f"{order:5d} {fits['plus'].fwhm / mech.gamma_m:9.5f} {fits['minus'].fwhm / mech.gamma_m:9.5f} {imb:+10.5f}")


if __name__ == "__main__":
    main()
