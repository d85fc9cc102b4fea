"""Power spectral densities of the read-out quadrature X = a + a^dagger.

Normalisation: each white-noise channel j carries weight kappa_j / (2 pi)
(Gamma / (2 pi) for the mechanical bath), i.e. the 1/(2 pi) of the
delta-correlated inputs is kept in the PSD. A PSD S(w) defined this way is
the two-sided Wiener-Khinchin density in angular frequency:
int S dw / (2 pi) is the variance of the weighted process.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import NegativeSpectrum, UnstableSystem, ValidationError
from .model import TWO_PI, SystemParams, derive, params_hash
from .response import (
    CHANNELS,
    TransferRow,
    check_sideband_regime,
    exact_transfer,
    generic_solve,
    sideband_sign,
    stability,
)

Ordering = Literal["symmetric", "normal", "antinormal"]
ORDERINGS = ("symmetric", "normal", "antinormal")

# samples below -NEG_TOL * max are an error; above it they are clipped to 0
NEG_TOL = 1e-12


@dataclass
class Spectrum:
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
            if np.max(np.abs(values.imag)) > 1e-12 * scale:
                raise NegativeSpectrum("spectrum has a non-negligible imaginary part")
            values = values.real
        values = np.array(values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValidationError("spectrum grid needs at least 2 points")
        if values.shape != self.grid.shape:
            raise ValidationError("grid and values differ in shape")
        if np.any(np.diff(self.grid) <= 0):
            raise ValidationError("spectrum grid must be strictly increasing")
        vmax = float(np.max(np.abs(values))) if values.size else 0.0
        if np.any(values < -NEG_TOL * vmax):
            raise NegativeSpectrum(f"spectrum negative beyond tolerance: min {values.min():.3e}")
        neg = values < 0
        self.meta.setdefault("clipped", 0)
        self.meta["clipped"] += int(np.count_nonzero(neg))
        values[neg] = 0.0
        self.values = values

    def to_csv(self, path=None, scale: float = 1.0) -> str:
        """Write ``omega_rad_s, psd`` with ``#``-prefixed metadata lines.

        ``scale`` multiplies the PSD column (e.g. 2*pi for a per-Hz display).
        """
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}: {self.meta[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["omega_rad_s", "psd"])
        for w, v in zip(self.grid, self.values):
            writer.writerow([repr(float(w)), repr(float(v * scale))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        meta = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition(": ")
                    meta[key] = val
                elif line.startswith("omega_rad_s"):
                    continue
                elif line.strip():
                    rows.append([float(x) for x in line.split(",")])
        arr = np.array(rows)
        meta.pop("clipped", None)
        return cls(arr[:, 0], arr[:, 1], meta)


def channel_weights(params: SystemParams):
    """Per-channel (weight, occupancy) in (readout, mechanical, cooling) order."""
    r = params.readout
    c = params.cooling
    w = np.array([r.kappa, params.gamma_m, c.kappa if c else 0.0]) / TWO_PI
    n = np.array([r.nbar, params.nbar_mech, c.nbar if c else 0.0])
    return w, n


def _channel_mask(channels: Optional[Iterable[str]]) -> np.ndarray:
    if channels is None:
        return np.ones(3)
    channels = set(channels)
    unknown = channels - set(CHANNELS)
    if unknown:
        raise ValidationError(f"unknown channels {sorted(unknown)}; expected a subset of {CHANNELS}")
    return np.array([1.0 if ch in channels else 0.0 for ch in CHANNELS])


def quadrature_transfer(row: TransferRow, partner: TransferRow):
    """X-quadrature coefficients from the row at w and the row at -w.

    X(w) = a(w) + [a(-w)]^dagger, so the coefficient on eta_j(w) is
    c_j(w) + conj(d_j(-w)) and on [eta_j(-w)]^dagger it is
    d_j(w) + conj(c_j(-w)).
    """
    cx = row.c + np.conj(partner.d)
    dx = row.d + np.conj(partner.c)
    return cx, dx


def psd_from_coefficients(cx, dx, weights, nbar, ordering: Ordering = "symmetric") -> np.ndarray:
    """Sum channel contributions; ``cx``, ``dx`` have channels on the last axis."""
    ac = np.abs(cx) ** 2
    ad = np.abs(dx) ** 2
    if ordering == "symmetric":
        per = (ac + ad) * (nbar + 0.5)
    elif ordering == "normal":
        per = ac * nbar + ad * (nbar + 1.0)
    elif ordering == "antinormal":
        per = ac * (nbar + 1.0) + ad * nbar
    else:
        raise ValidationError(f"unknown ordering {ordering!r}")
    return np.sum(weights * per, axis=-1)


def psd_from_transfer(
    row: TransferRow,
    params: SystemParams,
    ordering: Ordering = "symmetric",
    partner: Optional[TransferRow] = None,
    channels: Optional[Iterable[str]] = None,
):
    """PSD of X at the row's frequency; ``partner`` is the row at -w.

    When ``partner`` is omitted it is evaluated from the closed form.
    """
    if partner is None:
        partner = exact_transfer(-np.asarray(row.omega), params)
    cx, dx = quadrature_transfer(row, partner)
    w, n = channel_weights(params)
    return psd_from_coefficients(cx, dx, w * _channel_mask(channels), n, ordering)


def _require_stable(params):
    rep = stability(params)
    if not rep.stable:
        raise UnstableSystem(
            f"configuration is unstable (max Im root {rep.max_growth_rate:.3e} rad/s)"
        )


def psd_curve(
    grid,
    params: SystemParams,
    ordering: Ordering = "symmetric",
    channels: Optional[Iterable[str]] = None,
) -> Spectrum:
    """Exact PSD of X on ``grid`` from the direct linear solve.

    ``channels`` restricts the sum to a subset of the noise inputs; the
    default includes all three.
    """
    _require_stable(params)
    grid = np.asarray(grid, dtype=float)
    row = generic_solve(grid, params).row("a_r")
    partner = generic_solve(-grid, params).row("a_r")
    values = psd_from_transfer(row, params, ordering, partner=partner, channels=channels)
    meta = {
        "method": f"exact-{ordering}",
        "ordering": ordering,
        "params_hash": params_hash(params),
        "channels": ",".join(CHANNELS if channels is None else [c for c in CHANNELS if c in set(channels)]),
    }
    return Spectrum(grid, values, meta)


def psd_weak_coupling_terms(grid, params: SystemParams, sideband):
    """The two terms of the weak-coupling sideband PSD: (shot, mechanical).

    Same normalisation as :func:`psd_curve`, i.e. the integral over w / 2 pi
    gives the variance of X.
    """
    check_sideband_regime(params, sideband)
    s = sideband_sign(sideband)
    w = np.asarray(grid, dtype=float)
    d = derive(params)
    om, gam = params.omega_m, params.gamma_m
    r = params.readout
    c = params.cooling
    n_c = c.nbar if c else 0.0
    c_r, c_c = d.c_readout, d.c_cooling
    ceff = d.ceff_plus if s > 0 else d.ceff_minus
    xi_r = r.g / r.kappa
    dw2 = (w + s * om) ** 2
    shot = (
        ((1 + c_c) ** 2 + r.kappa**2 / (16 * om**2) * c_r**2)
        / (dw2 + r.kappa**2 / 4 * (1 + ceff) ** 2)
        * r.kappa
        * (r.nbar + 0.5)
    )
    mech = 4 * xi_r**2 * gam * (params.nbar_mech + 0.5 + c_c * (n_c + 0.5)) / (dw2 + gam**2 / 4 * (1 + ceff) ** 2)
    return shot / TWO_PI, mech / TWO_PI


def psd_weak_coupling(grid, params: SystemParams, sideband, terms: str = "both") -> Spectrum:
    """Weak-coupling closed-form PSD of the enhanced sideband.

    ``terms`` selects ``"both"``, ``"shot"`` (cavity term) or ``"sideband"``
    (the mechanical Lorentzian).
    """
    shot, mech = psd_weak_coupling_terms(grid, params, sideband)
    values = {"both": shot + mech, "shot": shot, "sideband": mech}[terms]
    meta = {
        "method": f"weak-coupling-{sideband}",
        "ordering": "symmetric",
        "params_hash": params_hash(params),
        "terms": terms,
    }
    return Spectrum(grid, values, meta)


def lorentzian_unit(grid, center, fwhm):
    """Lorentzian of unit area in w."""
    hw = 0.5 * fwhm
    return (hw / math.pi) / ((np.asarray(grid) - center) ** 2 + hw * hw)


def bare_mechanical_psd(grid, omega_m: float, gamma_m: float, nbar: float, ordering: Ordering = "symmetric") -> Spectrum:
    """Broadened two-delta spectrum of a bare oscillator.

    ``normal`` puts weight nbar at -Omega and nbar + 1 at +Omega,
    ``antinormal`` the reverse, ``symmetric`` nbar + 1/2 on both.
    """
    if omega_m <= 0 or gamma_m <= 0:
        raise ValidationError("omega_m and gamma_m must be > 0")
    if nbar < 0:
        raise ValidationError("nbar must be >= 0")
    lo = lorentzian_unit(grid, -omega_m, gamma_m)
    hi = lorentzian_unit(grid, omega_m, gamma_m)
    weight_lo, weight_hi = {
        "normal": (nbar, nbar + 1.0),
        "antinormal": (nbar + 1.0, nbar),
        "symmetric": (nbar + 0.5, nbar + 0.5),
    }[ordering]
    meta = {"method": "bare-mechanical", "ordering": ordering, "nbar": nbar}
    return Spectrum(grid, weight_lo * lo + weight_hi * hi, meta)


def peak_grid(centers, linewidth: float, n_per_linewidth: int = 20, halfwidth: float = 10.0, span=None, n_background: int = 200):
    """Grid clustered around ``centers`` with >= ``n_per_linewidth`` points per ``linewidth``.

    Each center gets a uniform patch of +-``halfwidth`` linewidths; an
    optional ``span=(lo, hi)`` adds a coarse uniform background.
    """
    pieces = []
    step = linewidth / n_per_linewidth
    for c in np.atleast_1d(centers):
        n = int(round(2 * halfwidth * n_per_linewidth)) + 1
        pieces.append(np.linspace(c - halfwidth * linewidth, c + halfwidth * linewidth, n))
    if span is not None:
        pieces.append(np.linspace(span[0], span[1], n_background))
    grid = np.unique(np.concatenate(pieces))
    keep = np.concatenate([[True], np.diff(grid) > 1e-9 * step])
    return grid[keep]
