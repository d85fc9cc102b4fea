import math
import warnings

import numpy as np
import pytest
from hypothesis import settings

from sideband_lab.errors import RegimeWarning
from sideband_lab.model import coupling_for_cooperativity, make_params

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

TWO_PI = 2 * math.pi
OMEGA = TWO_PI * 1e6
GAMMA = TWO_PI * 10.0
KAPPA = TWO_PI * 50e3


@pytest.fixture(autouse=True)
def _quiet_regime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        yield


def sideband_params(c_r=0.01, c_c=1.0, nbar_mech=5.0, detuning_r=0.0, kappa_c=None, nbar_r=0.0, nbar_c=0.0):
    """Resolved-sideband set in the Omega = 1 MHz, Gamma = 10 Hz, kappa = 50 kHz family."""
    kc = KAPPA if kappa_c is None else kappa_c
    return make_params(
        OMEGA,
        GAMMA,
        KAPPA,
        coupling_for_cooperativity(c_r, GAMMA, KAPPA),
        detuning_r=detuning_r,
        nbar_r=nbar_r,
        nbar_mech=nbar_mech,
        kappa_c=kc,
        g_c=coupling_for_cooperativity(c_c, GAMMA, kc) if c_c else None,
        nbar_c=nbar_c,
    )


def random_params(rng: np.random.Generator, with_cooling=True):
    """Random stable two-mode set with the cooling mode on the red sideband."""
    from sideband_lab.response import stability

    while True:
        om = rng.uniform(0.5, 2.0)
        gam = om * 10 ** rng.uniform(-4, -2)
        kr = om * 10 ** rng.uniform(-2, -0.5)
        kc = om * 10 ** rng.uniform(-2, -0.5)
        gr = kr * rng.uniform(0.0, 0.3)
        gc = kc * rng.uniform(0.0, 0.3) if with_cooling else None
        dr = om * rng.uniform(-1.5, 1.5)
        p = make_params(om, gam, kr, gr, detuning_r=dr, kappa_c=kc, g_c=gc,
                        nbar_mech=rng.uniform(0, 10), nbar_r=rng.uniform(0, 1), nbar_c=rng.uniform(0, 1))
        if stability(p).stable:
            return p


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def emit(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
