"""Sideband noise powers, Lorentzian fits and the asymmetry factor zeta."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import FitDiverged, NumericalError, PeakNotFound, UnstableRegime, ValidationError, WindowOutOfRange
from .model import SystemParams, derive
from .response import q1_ratio, sideband_sign
from .spectrum import Spectrum, psd_curve

MAX_FIT_ITER = 200
FIT_XTOL = 1e-10


@dataclass
class PeakReport:
    center: float
    fwhm: float
    height: float
    baseline: float
    area_fit: float
    area_quad: float
    residual_rms: float

    @property
    def area_gap(self) -> float:
        """|area_fit - area_quad| / area_quad."""
        return abs(self.area_fit - self.area_quad) / abs(self.area_quad)

    @property
    def relative_rms(self) -> float:
        return self.residual_rms / abs(self.height)


@dataclass
class AsymmetryReport:
    i_plus: float
    i_minus: float
    zeta_empirical: float
    zeta_analytic: float
    relative_gap: float
    shot_removal: str = "channel"
    peaks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, peak in self.peaks.items():
            out["peaks"][key]["area_gap"] = peak.area_gap
        return out


def lorentzian(w, center, fwhm, height, baseline=0.0):
    hw2 = (0.5 * fwhm) ** 2
    return height * hw2 / ((np.asarray(w) - center) ** 2 + hw2) + baseline


def lorentzian_area(fwhm, height) -> float:
    return 0.5 * math.pi * height * fwhm


def _window(spec: Spectrum, window):
    lo, hi = window
    if lo < spec.grid[0] or hi > spec.grid[-1] or lo >= hi:
        raise WindowOutOfRange(f"window [{lo}, {hi}] not inside grid [{spec.grid[0]}, {spec.grid[-1]}]")
    sel = (spec.grid >= lo) & (spec.grid <= hi)
    return spec.grid[sel], spec.values[sel]


def _initial_guess(x, y):
    baseline = float(min(y[0], y[-1]))
    k = int(np.argmax(y))
    if k == 0 or k == y.size - 1:
        raise PeakNotFound("maximum sits on the window edge; no interior peak")
    height = float(y[k] - baseline)
    if not height > 0:
        raise PeakNotFound("no local maximum above the window edges")
    half = baseline + 0.5 * height
    above = np.nonzero(y >= half)[0]
    fwhm = float(x[above[-1]] - x[above[0]]) if above.size > 1 else float(x[1] - x[0])
    fwhm = max(fwhm, float(np.min(np.diff(x))))
    return float(x[k]), fwhm, height, baseline


def _fit(x, y, min_samples: int = 8):
    c0, f0, h0, b0 = _initial_guess(x, y)
    n_across = np.count_nonzero(np.abs(x - c0) <= 0.5 * f0)
    if n_across < min_samples:
        raise ValidationError(f"only {n_across} samples across the peak; need >= {min_samples}")
    # dimensionless coordinates keep the Jacobian well scaled
    yscale = h0

    def resid(p):
        u0, logf, h, b = p
        return lorentzian((x - c0) / f0, u0, math.exp(logf), h, b) - y / yscale

    p0 = np.array([0.0, 0.0, 1.0, b0 / yscale])
    sol = least_squares(
        resid, p0, method="lm", xtol=FIT_XTOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_FIT_ITER * (p0.size + 1)
    )
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitDiverged(f"Lorentzian fit did not converge: {sol.message}")
    u0, logf, h, b = sol.x
    center = c0 + u0 * f0
    fwhm = math.exp(logf) * f0
    height = h * yscale
    baseline = b * yscale
    rms = float(np.sqrt(np.mean(sol.fun**2))) * yscale
    if not (fwhm > 0 and height > 3 * rms and height > 0):
        raise PeakNotFound(f"peak height {height:.3e} does not exceed 3x residual rms {rms:.3e}")
    return center, fwhm, height, baseline, rms


def _quad_area(x, y, center, fwhm, height, baseline):
    inside = np.trapezoid(y - baseline, x)
    hw = 0.5 * fwhm
    covered = height * hw * (math.atan((x[-1] - center) / hw) - math.atan((x[0] - center) / hw))
    return float(inside + (lorentzian_area(fwhm, height) - covered))


def fit_lorentzian(spec: Spectrum, window=None) -> PeakReport:
    """Least-squares fit of height*(g/2)^2/((w-w0)^2+(g/2)^2) + baseline.

    Initialised from a max / half-max scan of the window; converged when
    the relative step falls below 1e-10.
    """
    if window is None:
        window = (spec.grid[0], spec.grid[-1])
    x, y = _window(spec, window)
    center, fwhm, height, baseline, rms = _fit(x, y)
    return PeakReport(
        center=center,
        fwhm=fwhm,
        height=height,
        baseline=baseline,
        area_fit=lorentzian_area(fwhm, height),
        area_quad=_quad_area(x, y, center, fwhm, height, baseline),
        residual_rms=rms,
    )


def integrate_peak(spec: Spectrum, center: float, window_halfwidth: float, fwhm_estimate: Optional[float] = None) -> float:
    """Baseline-subtracted trapezoidal area with an analytic tail correction.

    The baseline, and the Lorentzian tails beyond the window, come from a
    fit over the same window.
    """
    lo, hi = center - window_halfwidth, center + window_halfwidth
    x, y = _window(spec, (lo, hi))
    if fwhm_estimate is None:
        fwhm_estimate = _initial_guess(x, y)[1]
    if window_halfwidth < 5 * fwhm_estimate:
        raise WindowOutOfRange(
            f"window half-width {window_halfwidth:.3e} is below 5x the linewidth estimate {fwhm_estimate:.3e}"
        )
    c, f, h, b, _ = _fit(x, y)
    return _quad_area(x, y, c, f, h, b)


def zeta_forms(params: SystemParams):
    """Both closed forms of the asymmetry factor: cooperativity and Q form."""
    d = derive(params)
    c_r, c_c = d.c_readout, d.c_cooling
    z_coop = 2 * c_r / (1 - c_r + c_c)
    r = params.readout
    cool = params.cooling
    kc = cool.kappa if cool else r.kappa
    gc = cool.g if cool else 0.0
    q = d.quality_factor
    z_q = 8 * r.g**2 * kc * q / (r.kappa * kc * params.omega_m - 4 * (r.g**2 * kc - gc**2 * r.kappa) * q)
    return z_coop, z_q


def zeta_analytic(params: SystemParams) -> float:
    """zeta = 2 C_r / (1 - C_r + C_c); requires C_r < 1 + C_c."""
    d = derive(params)
    if d.c_readout >= 1 + d.c_cooling:
        raise UnstableRegime(f"C_r = {d.c_readout:.6g} >= 1 + C_c = {1 + d.c_cooling:.6g}")
    z, z_q = zeta_forms(params)
    if abs(z - z_q) > 1e-12 * max(abs(z), 1e-300) and z != z_q:
        raise NumericalError(f"closed forms of zeta disagree: {z!r} vs {z_q!r}")
    return z


@dataclass(frozen=True)
class GridConfig:
    """Frequency window used for each sideband in :func:`measure_asymmetry`.

    Widths are in units of the effective linewidth Gamma (1 + C_eff).
    ``shot_removal`` is ``"channel"`` (drop the read-out input noise, then
    fit a baseline) or ``"baseline"`` (fit baseline only).
    """

    halfwidth: float = 15.0
    points_per_linewidth: int = 40
    shot_removal: str = "channel"


SIDEBAND_CHANNELS = ("mechanical", "cooling")


def sideband_spectrum(params: SystemParams, sideband: str, cfg: GridConfig = GridConfig()) -> Spectrum:
    """Exact symmetric PSD around the resonant mechanical sideband.

    The plus sideband (readout detuning +Omega) peaks at w = -Omega and the
    minus sideband at w = +Omega in the drive frame.
    """
    s = sideband_sign(sideband)
    p = params.with_readout(detuning=s * params.omega_m)
    d = derive(p)
    ceff = d.ceff_plus if s > 0 else d.ceff_minus
    lw = params.gamma_m * (1 + ceff)
    if lw <= 0:
        raise UnstableRegime(f"effective linewidth {lw:.3e} <= 0 for the {sideband} sideband")
    center = -s * params.omega_m
    n = int(2 * cfg.halfwidth * cfg.points_per_linewidth) + 1
    grid = np.linspace(center - cfg.halfwidth * lw, center + cfg.halfwidth * lw, n)
    if cfg.shot_removal == "channel":
        channels = SIDEBAND_CHANNELS
    elif cfg.shot_removal == "baseline":
        channels = None
    else:
        raise ValidationError(f"unknown shot_removal {cfg.shot_removal!r}")
    return psd_curve(grid, p, "symmetric", channels=channels)


def measure_asymmetry(params: SystemParams, grid_config: GridConfig = GridConfig()) -> AsymmetryReport:
    """Empirical zeta from the blue (+) and red (-) enhanced sideband areas."""
    z_an = zeta_analytic(params)
    peaks = {}
    for name in ("plus", "minus"):
        spec = sideband_spectrum(params, name, grid_config)
        peaks[name] = fit_lorentzian(spec)
    i_plus = peaks["plus"].area_quad
    i_minus = peaks["minus"].area_quad
    z_emp = i_plus / i_minus - 1.0
    gap = abs(z_emp - z_an) / abs(z_an) if z_an != 0 else abs(z_emp)
    return AsymmetryReport(
        i_plus=i_plus,
        i_minus=i_minus,
        zeta_empirical=z_emp,
        zeta_analytic=z_an,
        relative_gap=gap,
        shot_removal=grid_config.shot_removal,
        peaks=peaks,
    )


__all__ = [
    "PeakReport",
    "AsymmetryReport",
    "GridConfig",
    "lorentzian",
    "fit_lorentzian",
    "integrate_peak",
    "zeta_analytic",
    "zeta_forms",
    "measure_asymmetry",
    "sideband_spectrum",
    "q1_ratio",
]
