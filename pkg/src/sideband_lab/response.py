"""Frequency-domain linear response of the read-out field.

Fourier convention: f(w) = int exp(i w t) f(t) dt, so ``[eta(-w)]^dagger``
is the adjoint of the transform evaluated at -w and a causal response has
its poles in the lower half plane.

Noise channels are ordered (readout, mechanical, cooling); a
:class:`TransferRow` stores the coefficients multiplying ``eta_j(w)`` in
``c`` and those multiplying ``[eta_j(-w)]^dagger`` in ``d``, so that
``(c0, d0, c1, d1, c2, d2)`` are the closed-form q1..q6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import RegimeViolation, RootFindingFailure, SingularResponse, ValidationError
from .model import SystemParams, derive

CHANNELS = ("readout", "mechanical", "cooling")

# relative to the largest additive term of gimel^-1
SINGULAR_TOL = 1e-12

# unknown ordering of the 6x6 system
UNKNOWNS = ("b", "b_dag", "a_r", "a_r_dag", "a_c", "a_c_dag")


@dataclass(frozen=True)
class TransferRow:
    """Coefficients of one field amplitude on the six noise inputs.

    ``omega`` may be a scalar or an array of shape (N,); ``c`` and ``d``
    then have shape (3,) or (N, 3).
    """

    omega: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def q(self) -> np.ndarray:
        """Interleaved (q1, ..., q6) along the last axis."""
        out = np.empty(self.c.shape[:-1] + (6,), dtype=complex)
        out[..., 0::2] = self.c
        out[..., 1::2] = self.d
        return out

    @classmethod
    def from_q(cls, omega, q) -> "TransferRow":
        q = np.asarray(q, dtype=complex)
        return cls(np.asarray(omega), q[..., 0::2].copy(), q[..., 1::2].copy())


@dataclass(frozen=True)
class TransferMatrix:
    omega: np.ndarray
    system: np.ndarray  # (N, 6, 6) system matrix M
    matrix: np.ndarray  # (N, 6, 6): unknowns = matrix @ noise (q order)

    def row(self, unknown: str = "a_r") -> TransferRow:
        return TransferRow.from_q(self.omega, self.matrix[..., UNKNOWNS.index(unknown), :])


@dataclass(frozen=True)
class StabilityReport:
    roots: np.ndarray
    stable: bool
    coefficients: np.ndarray  # ascending powers of omega

    @property
    def max_growth_rate(self) -> float:
        return float(np.max(self.roots.imag))


def _constants(params: SystemParams):
    r = params.readout
    c = params.cooling
    om = params.omega_m
    if c is None:
        # decoupled stand-in: g_c = 0 factors the cooling bracket out
        return om, params.gamma_m, r.detuning, r.kappa, r.g, -om, r.kappa, 0.0
    return om, params.gamma_m, r.detuning, r.kappa, r.g, c.detuning, c.kappa, c.g


def gimel_inv(omega, params: SystemParams):
    """Characteristic function (gimel(w))^-1 of the coupled system.

    Written for a general cooling detuning; with Delta_c = -Omega it matches
    the closed-form coefficients term by term. Equals det of the 6x6 system
    matrix of :func:`generic_solve`.
    """
    w = np.asarray(omega, dtype=float)
    om, gam, dr, kr, gr, dc, kc, gc = _constants(params)
    pm = om**2 - (w + 0.5j * gam) ** 2
    pr = dr**2 - (w + 0.5j * kr) ** 2
    pc = dc**2 - (w + 0.5j * kc) ** 2
    return pm * pr * pc + 4 * om * dr * gr**2 * pc + 4 * om * dc * gc**2 * pr


def _gimel_terms(w, params):
    om, gam, dr, kr, gr, dc, kc, gc = _constants(params)
    pm = om**2 - (w + 0.5j * gam) ** 2
    pr = dr**2 - (w + 0.5j * kr) ** 2
    pc = dc**2 - (w + 0.5j * kc) ** 2
    return pm * pr * pc, 4 * om * dr * gr**2 * pc, 4 * om * dc * gc**2 * pr


def _require_red_cooling(params: SystemParams):
    c = params.cooling
    if c is not None and c.g != 0.0 and not math.isclose(c.detuning, -params.omega_m, rel_tol=1e-12):
        raise ValidationError(
            "closed-form coefficients assume the cooling mode sits on the red sideband "
            "(detuning = -omega_m); use generic_solve for other detunings"
        )


def exact_transfer(omega, params: SystemParams) -> TransferRow:
    """Closed-form coefficients q1..q6 of the read-out field."""
    _require_red_cooling(params)
    w = np.asarray(omega, dtype=float)
    om, gam, dr, kr, gr, dc, kc, gc = _constants(params)
    terms = _gimel_terms(w, params)
    ginv = terms[0] + terms[1] + terms[2]
    scale = np.maximum.reduce([np.abs(t) for t in terms])
    if np.any(np.abs(ginv) <= SINGULAR_TOL * scale):
        raise SingularResponse("gimel^-1 vanishes at a requested frequency")
    gim = 1.0 / ginv

    cool = om**2 - (w + 0.5j * kc) ** 2
    mech = om**2 - (w + 0.5j * gam) ** 2
    rd = dr - w - 0.5j * kr
    q1 = gim * (cool * (mech * rd + 2 * om * gr**2) - 4 * gc**2 * om**2 * rd)
    q2 = -gim * 2 * om * gr**2 * cool
    q3 = gim * gr * rd * (om + w + 0.5j * gam) * cool
    q4 = gim * gr * rd * (om - w - 0.5j * gam) * cool
    q5 = gim * 2 * om * gr * gc * rd * (om + w + 0.5j * kc)
    q6 = gim * 2 * om * gr * gc * rd * (om - w - 0.5j * kc)
    return TransferRow.from_q(w, np.stack([q1, q2, q3, q4, q5, q6], axis=-1))


def system_matrix(omega, params: SystemParams) -> np.ndarray:
    """6x6 matrix M(w) with M x = P eta for x ordered as :data:`UNKNOWNS`."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    om, gam, dr, kr, gr, dc, kc, gc = _constants(params)
    m = np.zeros(w.shape + (6, 6), dtype=complex)
    m[..., 0, 0] = w - om + 0.5j * gam
    m[..., 1, 1] = -w - om - 0.5j * gam
    m[..., 2, 2] = w + dr + 0.5j * kr
    m[..., 3, 3] = -w + dr - 0.5j * kr
    m[..., 4, 4] = w + dc + 0.5j * kc
    m[..., 5, 5] = -w + dc - 0.5j * kc
    for row in (0, 1):
        m[..., row, 2] = m[..., row, 3] = gr
        m[..., row, 4] = m[..., row, 5] = gc
    for row in (2, 3):
        m[..., row, 0] = m[..., row, 1] = gr
    for row in (4, 5):
        m[..., row, 0] = m[..., row, 1] = gc
    return m


# equation row driven by each noise input (q order: r, r_dag, B, B_dag, c, c_dag)
_NOISE_ROW = (2, 3, 0, 1, 4, 5)


def generic_solve(omega, params: SystemParams, cond_limit: float = 1e13) -> TransferMatrix:
    """Solve the Fourier-transformed equations of motion directly.

    Returns the full transfer matrix from the noise vector (q order) to all
    six unknowns. Raises :class:`SingularResponse` when the system matrix is
    numerically singular.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    m = system_matrix(w, params)
    perm = np.zeros((6, 6))
    perm[_NOISE_ROW, np.arange(6)] = 1.0
    cond = np.linalg.cond(m)
    if not np.all(np.isfinite(cond)) or np.any(cond > cond_limit):
        raise SingularResponse("system matrix is numerically singular")
    try:
        t = np.linalg.solve(m, np.broadcast_to(perm, m.shape))
    except np.linalg.LinAlgError as exc:
        raise SingularResponse(str(exc)) from None
    if np.ndim(omega) == 0:
        return TransferMatrix(w[0], m[0], t[0])
    return TransferMatrix(w, m, t)


def _bracket(center_sq: float, rate: float) -> np.ndarray:
    # c^2 - (w + i r/2)^2 in ascending powers of w
    return np.array([center_sq + rate**2 / 4, -1j * rate, -1.0], dtype=complex)


def characteristic_polynomial(params: SystemParams) -> np.ndarray:
    """Ascending coefficients of gimel^-1 as a degree-6 polynomial in w."""
    P = np.polynomial.polynomial
    om, gam, dr, kr, gr, dc, kc, gc = _constants(params)
    pm = _bracket(om**2, gam)
    pr = _bracket(dr**2, kr)
    pc = _bracket(dc**2, kc)
    poly = P.polymul(P.polymul(pm, pr), pc)
    poly = P.polyadd(poly, 4 * om * dr * gr**2 * pc)
    poly = P.polyadd(poly, 4 * om * dc * gc**2 * pr)
    return poly


def stability(params: SystemParams) -> StabilityReport:
    coeffs = characteristic_polynomial(params)
    # companion matrix of the monic polynomial
    monic = coeffs[:-1] / coeffs[-1]
    comp = np.zeros((6, 6), dtype=complex)
    comp[1:, :-1] = np.eye(5)
    comp[:, -1] = -monic
    try:
        roots = np.linalg.eigvals(comp)
    except np.linalg.LinAlgError as exc:
        raise RootFindingFailure(str(exc)) from None
    if roots.shape != (6,) or not np.all(np.isfinite(roots)):
        raise RootFindingFailure("companion eigenvalues did not converge")
    roots = roots[np.lexsort((roots.imag, roots.real))]
    return StabilityReport(roots=roots, stable=bool(np.all(roots.imag < 0)), coefficients=coeffs)


Sideband = Literal["plus", "minus"]


def sideband_sign(sideband: Sideband) -> int:
    if sideband == "plus":
        return 1
    if sideband == "minus":
        return -1
    raise ValueError(f"sideband must be 'plus' or 'minus', got {sideband!r}")


def check_sideband_regime(params: SystemParams, sideband: Sideband):
    """Weak-coupling, resolved-sideband and Delta_r = +-Omega preconditions."""
    s = sideband_sign(sideband)
    if not (params.weak_coupling and params.resolved_sideband):
        raise RegimeViolation("weak-coupling and resolved-sideband flags must both be set")
    if not math.isclose(params.readout.detuning, s * params.omega_m, rel_tol=1e-9):
        raise RegimeViolation(
            f"{sideband} sideband needs readout detuning {'+' if s > 0 else '-'}omega_m"
        )


def approx_readout(omega, params: SystemParams, sideband: Sideband):
    """Weak-coupling amplitudes (Q, R) of the enhanced sideband.

    Near the resonant sideband, for the minus sideband
    a_r ~ Q eta_r + R (eta_B + 2i xi_c eta_c); for the plus sideband
    a_r ~ Q eta_r - R (eta_B - 2i xi_c eta_c)^dagger(-w).
    """
    check_sideband_regime(params, sideband)
    s = sideband_sign(sideband)
    w = np.asarray(omega, dtype=float)
    d = derive(params)
    om, gam, kr = params.omega_m, params.gamma_m, params.readout.kappa
    c_r, c_c = d.c_readout, d.c_cooling
    ceff = d.ceff_plus if s > 0 else d.ceff_minus
    xi_r = params.readout.g / kr
    q = (1 - 1j * kr / (4 * om) * c_r + c_c) / (w + s * om + 0.5j * kr * (1 + ceff))
    r = 2j * xi_r / (w + s * om + 0.5j * gam * (1 + ceff))
    return q, r


def weak_q1_amplitudes(params: SystemParams, kappa_2: float):
    """Weak-coupling amplitudes A_+-, B_+- of q1(+-Omega) at Delta_r = 0.

    ``kappa_2`` is the linewidth entering the second-order correction and is
    left to the caller. Cross-check only; :func:`q1_ratio` uses exact q1.
    """
    d = derive(params)
    om = params.omega_m
    kr = params.readout.kappa
    kc = params.cooling.kappa if params.cooling is not None else kr
    c_r, c_c = d.c_readout, d.c_cooling
    a = {s: 2 * (1 + c_c) * om - kappa_2 / (4 * om) * (kr + s * kc * c_r) for s in (1, -1)}
    b = {s: kr * (1 + c_c) + kc * (0.5 + s * c_r) for s in (1, -1)}
    return a[1], a[-1], b[1], b[-1]


def weak_q1_ratio(params: SystemParams, kappa_2: float) -> float:
    a_p, a_m, b_p, b_m = weak_q1_amplitudes(params, kappa_2)
    return abs((a_m + 1j * b_m) / (a_p - 1j * b_p))


def q1_ratio(params: SystemParams) -> float:
    """|q1(Omega) / q1(-Omega)| from the exact coefficients."""
    om = params.omega_m
    row = exact_transfer(np.array([om, -om]), params)
    q1 = row.c[:, 0]
    return float(abs(q1[0] / q1[1]))


__all__ = [
    "CHANNELS",
    "TransferRow",
    "TransferMatrix",
    "StabilityReport",
    "gimel_inv",
    "exact_transfer",
    "system_matrix",
    "generic_solve",
    "characteristic_polynomial",
    "stability",
    "approx_readout",
    "weak_q1_ratio",
    "q1_ratio",
]
