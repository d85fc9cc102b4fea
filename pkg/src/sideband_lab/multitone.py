"""Single cavity mode driven by several tones.

After the coherent shift a = A + sum_j alpha_j exp(-i varpi_j t), the
linearised equations couple A, A^dagger, B, B^dagger at frequencies that
differ by integer combinations of the tone frequencies. The Fourier
amplitudes live on a lattice: a node is (field, n) with n an integer vector
and frequency w + n . varpi. Around the base point w the resonant nodes are

    A(w),  B(w - varpi_j),  B~(w - varpi_j),  A~(w - 2 varpi_j)

(``~`` is the Fourier amplitude of the adjoint field). The truncation order
of a node is the minimal number of tone-difference steps varpi_i - varpi_j
separating it from that resonant set.

Frequencies are absolute (lab frame), in rad/s.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import RegimeWarning, SystemTooLarge, ValidationError
from .model import TWO_PI, cooperativity
from .spectrum import Spectrum, psd_from_coefficients

MAX_UNKNOWNS = 729
FIELDS = ("A", "B", "Bt", "At")


@dataclass(frozen=True)
class Tone:
    freq: float
    amp: complex


@dataclass(frozen=True)
class ToneSet:
    g0: float
    kappa: float
    omega_cav: float
    tones: tuple[Tone, ...]
    delta: float = 0.0
    delta_c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(Tone(float(t[0]), complex(t[1])) if not isinstance(t, Tone) else t for t in self.tones))
        if not (self.kappa > 0 and self.g0 >= 0):
            raise ValidationError("ToneSet needs kappa > 0 and g0 >= 0")
        if len(self.tones) == 0:
            raise ValidationError("ToneSet needs at least one tone")

    @property
    def varpi(self) -> np.ndarray:
        return np.array([t.freq for t in self.tones])


@dataclass(frozen=True)
class Mechanics:
    omega_m: float
    gamma_m: float


@dataclass(frozen=True)
class Occupancies:
    cavity: float = 0.0
    mechanical: float = 0.0


@dataclass(frozen=True)
class ShiftedFrame:
    tones: ToneSet
    alpha: np.ndarray
    beta: complex

    @property
    def couplings(self) -> np.ndarray:
        """Linearised per-tone couplings g_j = g0 |alpha_j|."""
        return self.tones.g0 * np.abs(self.alpha)

    def cooperativities(self, mech: Mechanics) -> np.ndarray:
        return np.array([cooperativity(g, mech.gamma_m, self.tones.kappa) for g in self.couplings])

    def cavity_shift(self) -> float:
        """Static renormalisation of the cavity frequency from beta (report only)."""
        return -2.0 * self.tones.g0 * self.beta.real


def tone_shift(ts: ToneSet, mech: Mechanics) -> ShiftedFrame:
    """alpha_j = s_j / (Delta_j + i kappa/2), Delta_j = varpi_j - omega_cav;
    beta = g0 sum |alpha_j|^2 / (Omega - i Gamma/2)."""
    gam = mech.gamma_m
    if ts.delta and not (10 * gam < ts.delta < ts.kappa / 10):
        warnings.warn("probe offset delta outside Gamma << delta << kappa", RegimeWarning, stacklevel=2)
    if ts.delta_c and not ts.delta_c > ts.delta + gam:
        warnings.warn("cooling offset delta_c does not exceed delta + Gamma", RegimeWarning, stacklevel=2)
    det = ts.varpi - ts.omega_cav
    amps = np.array([t.amp for t in ts.tones], dtype=complex)
    alpha = amps / (det + 0.5j * ts.kappa)
    beta = ts.g0 * float(np.sum(np.abs(alpha) ** 2)) / (mech.omega_m - 0.5j * gam)
    return ShiftedFrame(ts, alpha, complex(beta))


def amplitude_for_cooperativity(c: float, tone_freq: float, ts_kappa: float, omega_cav: float, g0: float, gamma_m: float) -> complex:
    """Tone amplitude s giving per-tone cooperativity ``c`` with real alpha."""
    mag = math.sqrt(c * gamma_m * ts_kappa / 4.0) / g0
    return mag * ((tone_freq - omega_cav) + 0.5j * ts_kappa)


def probe_toneset(
    omega_cav: float,
    kappa: float,
    g0: float,
    mech: Mechanics,
    delta: float,
    c_plus: float,
    c_minus: float,
    delta_c: Optional[float] = None,
    c_cool: float = 0.0,
) -> ToneSet:
    """Blue probe at omega_cav + Omega + delta, red probe at omega_cav - Omega - delta
    and optional cooling tone at omega_cav - Omega - delta_c.

    Tone order is (plus, minus[, cooling]); the plus tone produces the
    sideband at omega_cav + delta.
    """
    om = mech.omega_m
    freqs = [omega_cav + om + delta, omega_cav - om - delta]
    coops = [c_plus, c_minus]
    if delta_c is not None:
        freqs.append(omega_cav - om - delta_c)
        coops.append(c_cool)
    tones = tuple(Tone(f, amplitude_for_cooperativity(c, f, kappa, omega_cav, g0, mech.gamma_m)) for f, c in zip(freqs, coops))
    return ToneSet(g0, kappa, omega_cav, tones, delta, delta_c or 0.0)


def ceff_multitone(c_plus: float, c_minus: float, c_cool: float, gamma_m: float, delta: float, delta_c: float):
    """Effective cooperativities (C_eff+, C_eff-) of the two probe sidebands.

    Cross terms from the other tones are suppressed by Lorentzian factors of
    their detuning from the mechanical resonance.
    """
    g2 = gamma_m**2
    probe = g2 / (16 * delta**2 + g2)
    cp = c_cool * g2 / (4 * (delta_c + delta) ** 2 + g2) - c_plus + c_minus * probe
    cm = c_cool * g2 / (4 * (delta_c - delta) ** 2 + g2) + c_minus - c_plus * probe
    return cp, cm


def ceff_from_frame(frame: ShiftedFrame, mech: Mechanics):
    """:func:`ceff_multitone` for a three-tone (plus, minus, cooling) frame."""
    c = frame.cooperativities(mech)
    c_cool = c[2] if c.size > 2 else 0.0
    ts = frame.tones
    return ceff_multitone(c[0], c[1], c_cool, mech.gamma_m, ts.delta, ts.delta_c)


# -- harmonic lattice -------------------------------------------------------


def lattice_nodes(n_tones: int, truncation_order: int, cap: int = MAX_UNKNOWNS):
    """Nodes (field, n) up to the truncation order, deterministically ordered."""
    if truncation_order < 0:
        raise ValidationError("truncation_order must be >= 0")
    eye = np.eye(n_tones, dtype=int)
    level = {("A", (0,) * n_tones)}
    for j in range(n_tones):
        level |= {("B", tuple(-eye[j])), ("Bt", tuple(-eye[j])), ("At", tuple(-2 * eye[j]))}
    nodes = set(level)
    steps = [eye[i] - eye[j] for i in range(n_tones) for j in range(n_tones) if i != j]
    for _ in range(truncation_order):
        nxt = {(f, tuple(np.add(n, s))) for f, n in level for s in steps}
        level = nxt - nodes
        nodes |= level
        if len(nodes) > cap:
            raise SystemTooLarge(f"{len(nodes)} unknowns exceed the cap of {cap}")
    return sorted(nodes, key=lambda fn: (FIELDS.index(fn[0]), sum(abs(x) for x in fn[1]), fn[1]))


@dataclass
class HarmonicSystem:
    nodes: list
    index: dict
    matrix: np.ndarray  # (n_omega, N, N)
    base: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)


def build_harmonic_system(omega, frame: ShiftedFrame, mech: Mechanics, truncation_order: int = 1, cap: int = MAX_UNKNOWNS) -> HarmonicSystem:
    """Linear system M(w) x = eta over the lattice amplitudes at base frequencies ``omega``.

    Rows are the equations of the node's own field; couplings to nodes beyond
    the truncation order are dropped.
    """
    ts = frame.tones
    varpi = ts.varpi
    k = varpi.size
    nodes = lattice_nodes(k, truncation_order, cap)
    index = {node: i for i, node in enumerate(nodes)}
    n_un = len(nodes)
    eye = np.eye(k, dtype=int)
    off = np.zeros((n_un, n_un), dtype=complex)
    g = ts.g0 * frame.alpha
    gc = np.conj(g)

    def put(row, fld, vec, val):
        j = index.get((fld, tuple(vec)))
        if j is not None:
            off[row, j] += val

    for i, (fld, n) in enumerate(nodes):
        n = np.array(n)
        for q in range(k):
            if fld == "A":
                put(i, "B", n - eye[q], g[q])
                put(i, "Bt", n - eye[q], g[q])
            elif fld == "At":
                put(i, "B", n + eye[q], gc[q])
                put(i, "Bt", n + eye[q], gc[q])
            else:
                put(i, "A", n + eye[q], gc[q])
                put(i, "At", n - eye[q], g[q])

    base = np.atleast_1d(np.asarray(omega, dtype=float))
    shift = np.array([np.dot(n, varpi) for _, n in nodes])
    sgn = np.array([1.0 if f in ("A", "B") else -1.0 for f, _ in nodes])
    const = np.array(
        [
            {
                "A": -ts.omega_cav + 0.5j * ts.kappa,
                "B": -mech.omega_m + 0.5j * mech.gamma_m,
                "At": -ts.omega_cav - 0.5j * ts.kappa,
                "Bt": -mech.omega_m - 0.5j * mech.gamma_m,
            }[f]
            for f, _ in nodes
        ]
    )
    diag = sgn * (base[:, None] + shift[None, :]) + const
    mat = np.broadcast_to(off, (base.size, n_un, n_un)).copy()
    idx = np.arange(n_un)
    mat[:, idx, idx] = diag
    return HarmonicSystem(nodes, index, mat, base)


def _response_row(system: HarmonicSystem) -> np.ndarray:
    """Coefficients of A(base) on every node's noise input, shape (n_omega, N)."""
    e = np.zeros((system.base.size, system.size, 1), dtype=complex)
    e[:, system.index[("A", (0,) * len(system.nodes[0][1]))], 0] = 1.0
    return np.linalg.solve(np.transpose(system.matrix, (0, 2, 1)), e)[..., 0]


def multitone_psd(
    grid,
    ts: ToneSet,
    mech: Mechanics,
    occupancies: Occupancies = Occupancies(),
    truncation: int = 1,
    ordering: str = "symmetric",
    ref: Optional[Sequence[int]] = None,
    channels=None,
) -> Spectrum:
    """PSD of X(w) = A(ref + w) + [A(ref - w)]^dagger.

    ``ref`` is an integer vector m selecting the reference frequency
    m . varpi (default: the lab frame, m = 0). Noise inputs at the same
    frequency from the two solves are merged before squaring.
    """
    frame = tone_shift(ts, mech)
    k = len(ts.tones)
    m = np.zeros(k, dtype=int) if ref is None else np.asarray(ref, dtype=int)
    if m.shape != (k,):
        raise ValidationError(f"ref must have one integer per tone ({k})")
    grid = np.asarray(grid, dtype=float)
    ref_freq = float(np.dot(m, ts.varpi))
    weight = {"A": ts.kappa / TWO_PI, "B": mech.gamma_m / TWO_PI}
    occ = {"A": occupancies.cavity, "B": occupancies.mechanical}
    use = {"A": True, "B": True}
    if channels is not None:
        channels = set(channels)
        use = {"A": "readout" in channels, "B": "mechanical" in channels}

    keys: dict = {}
    cols_c: list = []
    cols_d: list = []
    for sign in (1, -1):
        system = build_harmonic_system(ref_freq + sign * grid, frame, mech, truncation)
        row = _response_row(system)
        if sign < 0:
            row = np.conj(row)
        for j, (fld, n) in enumerate(system.nodes):
            dag_node = fld in ("At", "Bt")
            v = np.asarray(n) + m
            key_vec = tuple(-v) if dag_node else tuple(v)
            key = ("A" if fld in ("A", "At") else "B", sign * (-1 if dag_node else 1), key_vec)
            if key not in keys:
                keys[key] = len(cols_c)
                cols_c.append(np.zeros(grid.size, dtype=complex))
                cols_d.append(np.zeros(grid.size, dtype=complex))
            dagger = dag_node != (sign < 0)
            (cols_d if dagger else cols_c)[keys[key]] += row[:, j]
    ordered = list(keys)
    cx = np.stack(cols_c, axis=-1)
    dx = np.stack(cols_d, axis=-1)
    w = np.array([weight[f] * use[f] for f, _, _ in ordered])
    nb = np.array([occ[f] for f, _, _ in ordered])
    values = psd_from_coefficients(cx, dx, w, nb, ordering)
    meta = {
        "method": f"multitone-{ordering}",
        "ordering": ordering,
        "truncation": truncation,
        "ref_frequency": repr(ref_freq),
        "unknowns": len(lattice_nodes(k, truncation)),
    }
    return Spectrum(grid, values, meta)


@dataclass(frozen=True)
class Spur:
    freq: float
    amplitude: complex

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


def coherent_spurs(ts: ToneSet, mech: Mechanics) -> list[Spur]:
    """Coherent lines in A from beats between tone pairs (first order in g0).

    The beat alpha_q^* alpha_r drives the mechanics at varpi_r - varpi_q; the
    driven motion scatters tone p to varpi_p +- (varpi_r - varpi_q). These
    are deterministic and kept out of the noise PSD.
    """
    frame = tone_shift(ts, mech)
    varpi = ts.varpi
    k = varpi.size
    eye = np.eye(k, dtype=int)
    g0, a = ts.g0, frame.alpha
    lines: dict = {}
    for q in range(k):
        for r in range(k):
            if q == r:
                continue
            d = varpi[r] - varpi[q]
            b_d = -g0 * np.conj(a[q]) * a[r] / (d - mech.omega_m + 0.5j * mech.gamma_m)
            for p in range(k):
                for sgn, amp in ((1, b_d), (-1, np.conj(b_d))):
                    vec = tuple(eye[p] + sgn * (eye[r] - eye[q]))
                    f = float(np.dot(vec, varpi))
                    lines[vec] = lines.get(vec, 0j) - g0 * a[p] * amp / (f - ts.omega_cav + 0.5j * ts.kappa)
    return [Spur(float(np.dot(v, varpi)), complex(lines[v])) for v in sorted(lines, key=lambda v: float(np.dot(v, varpi)))]


# -- JSON -------------------------------------------------------------------


def toneset_from_dict(doc: dict) -> ToneSet:
    """ToneSet from JSON; frequencies and amplitudes in Hz (scaled by 2 pi)."""
    try:
        tones = tuple(
            Tone(TWO_PI * float(t["freq_hz"]), TWO_PI * complex(float(t.get("amp_re", 0.0)), float(t.get("amp_im", 0.0))))
            for t in doc["tones"]
        )
        return ToneSet(
            g0=TWO_PI * float(doc["g0_hz"]),
            kappa=TWO_PI * float(doc["kappa_hz"]),
            omega_cav=TWO_PI * float(doc["omega_cav_hz"]),
            tones=tones,
            delta=TWO_PI * float(doc.get("delta_hz", 0.0)),
            delta_c=TWO_PI * float(doc.get("delta_c_hz", 0.0)),
        )
    except KeyError as exc:
        raise ValidationError(f"tone set: missing key {exc.args[0]!r}") from None


def toneset_to_dict(ts: ToneSet) -> dict:
    def hz(x):
        return float(f"{x / TWO_PI:.15g}")

    return {
        "g0_hz": hz(ts.g0),
        "kappa_hz": hz(ts.kappa),
        "omega_cav_hz": hz(ts.omega_cav),
        "delta_hz": hz(ts.delta),
        "delta_c_hz": hz(ts.delta_c),
        "tones": [{"freq_hz": hz(t.freq), "amp_re": hz(t.amp.real), "amp_im": hz(t.amp.imag)} for t in ts.tones],
    }


def load_toneset(path):
    """Tone set plus optional mechanics/occupancies (``omega_m_hz``, ``gamma_m_hz``,
    ``nbar_mech``, ``nbar_cav``) from one JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    ts = toneset_from_dict(doc)
    mech = None
    if "omega_m_hz" in doc:
        mech = Mechanics(TWO_PI * float(doc["omega_m_hz"]), TWO_PI * float(doc["gamma_m_hz"]))
    occ = Occupancies(float(doc.get("nbar_cav", 0.0)), float(doc.get("nbar_mech", 0.0)))
    return ts, mech, occ


__all__ = [
    "Tone",
    "ToneSet",
    "Mechanics",
    "Occupancies",
    "ShiftedFrame",
    "HarmonicSystem",
    "Spur",
    "tone_shift",
    "probe_toneset",
    "amplitude_for_cooperativity",
    "ceff_multitone",
    "ceff_from_frame",
    "lattice_nodes",
    "build_harmonic_system",
    "multitone_psd",
    "coherent_spurs",
    "toneset_from_dict",
    "toneset_to_dict",
    "load_toneset",
]
