"""Time-domain oracle: the linear equations of motion as a classical SDE.

State z = (b, a_r[, a_c]) in the drive frame:

    db/dt   = (-i Omega - Gamma/2) b + i sum_j g_j (a_j + a_j^*) - i eta_B
    da_j/dt = (i Delta_j - kappa_j/2) a_j + i g_j (b + b^*)     - i eta_j

Each eta is circular complex white noise with <eta^*(t) eta(t')> =
kappa_j (nbar_j + 1/2) / (2 pi) delta(t - t'). For a decoupled cavity this
gives <|a|^2> = (nbar + 1/2) / (2 pi), and the two-sided PSD of
X = a + a^* in angular frequency coincides with :func:`spectrum.psd_curve`.

Both integrators are linear recursions x_{k+1} = Phi x_k + L n_k on the
real state (Re z, Im z):

* ``euler``: Phi = 1 + A dt, L = B sqrt(dt) (Euler-Maruyama).
* ``exact``: Phi = exp(A dt), L L^T = int_0^dt e^{As} B B^T e^{A^T s} ds
  (Van Loan), exact in distribution at any step.

Gaussians come from Philox-generated uniforms through Box-Muller.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.linalg
import scipy.signal

from .errors import StepTooLarge, TooFewSamples, UnstableSystem, ValidationError
from .model import TWO_PI, SystemParams, params_hash
from .response import stability
from .spectrum import Spectrum, _channel_mask

RNG_NAME = "numpy-Philox4x32-10+Box-Muller"
EM_STEP_FACTOR = 0.02
EXACT_NYQUIST_MARGIN = 1.2
RECORD_MAGIC = b"SBLREC1\x00"


@dataclass(frozen=True)
class SimConfig:
    """Integration settings; times in seconds.

    ``channels`` restricts which noise inputs are driven (all by default).
    ``initial`` sets (b, a_r[, a_c]) at t = 0. ``check_invariants`` enforces
    duration >= 50 / Gamma_eff and burn_in >= 10 / Gamma_eff, where
    Gamma_eff is the slowest energy decay rate of the coupled system.
    """

    dt: float
    duration: float
    seed: int = 0
    n_trajectories: int = 1
    burn_in: float = 0.0
    integrator: str = "euler"
    record_every: int = 1
    noise: bool = True
    channels: Optional[tuple] = None
    initial: Optional[tuple] = None
    check_invariants: bool = True
    chunk_steps: int = 1 << 18


@dataclass
class Trajectories:
    t: np.ndarray
    b: np.ndarray
    a_r: np.ndarray
    a_c: Optional[np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        """Read-out quadrature X = a_r + a_r^*."""
        return 2.0 * self.a_r.real


@dataclass
class PsdEstimate:
    spectrum: Spectrum
    stderr: np.ndarray
    n_segments: int

    def window(self, lo: float, hi: float) -> "PsdEstimate":
        sel = (self.spectrum.grid >= lo) & (self.spectrum.grid <= hi)
        spec = Spectrum(self.spectrum.grid[sel], self.spectrum.values[sel], dict(self.spectrum.meta))
        return PsdEstimate(spec, self.stderr[sel], self.n_segments)


def slowest_decay_rate(params: SystemParams) -> float:
    """Gamma_eff = -2 max Im(root) of the characteristic polynomial."""
    rep = stability(params)
    if not rep.stable:
        raise UnstableSystem(f"configuration is unstable (max Im root {rep.max_growth_rate:.3e} rad/s)")
    return -2.0 * rep.max_growth_rate


def drift_matrices(params: SystemParams, channels=None):
    """Real drift A and diffusion B of the state (Re z, Im z)."""
    modes = [params.readout] + ([params.cooling] if params.cooling else [])
    n = 1 + len(modes)
    p = np.zeros((n, n), dtype=complex)
    r = np.zeros((n, n), dtype=complex)
    p[0, 0] = -1j * params.omega_m - 0.5 * params.gamma_m
    for j, m in enumerate(modes, start=1):
        p[j, j] = 1j * m.detuning - 0.5 * m.kappa
        p[0, j] = p[j, 0] = r[0, j] = r[j, 0] = 1j * m.g
    # z = u + i v;  P z + R z^*  in real form
    a = np.block([[p.real + r.real, -p.imag + r.imag], [p.imag + r.imag, p.real - r.real]])
    mask = _channel_mask(channels)
    dens = [mask[1] * params.gamma_m * (params.nbar_mech + 0.5)]
    for m in modes:
        dens.append(mask[{"readout": 0, "cooling": 2}[m.role]] * m.kappa * (m.nbar + 0.5))
    d = np.array(dens) / TWO_PI
    sd = np.sqrt(0.5 * d)
    bmat = np.diag(np.concatenate([sd, sd]))
    return a, bmat


def _van_loan(a: np.ndarray, bmat: np.ndarray, h: float):
    n = a.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = -a
    big[:n, n:] = bmat @ bmat.T
    big[n:, n:] = a.T
    e = scipy.linalg.expm(big * h)
    phi = e[n:, n:].T
    q = phi @ e[:n, n:]
    return phi, 0.5 * (q + q.T)


def _psd_sqrt(q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(q)
    return v * np.sqrt(np.clip(w, 0.0, None))


def step_matrices(params: SystemParams, cfg: SimConfig):
    a, bmat = drift_matrices(params, cfg.channels)
    if not cfg.noise:
        bmat = np.zeros_like(bmat)
    h = cfg.dt
    if cfg.integrator == "euler":
        return np.eye(a.shape[0]) + a * h, bmat * math.sqrt(h)
    if cfg.integrator == "exact":
        phi, q = _van_loan(a, bmat, h)
        return phi, _psd_sqrt(q)
    raise ValidationError(f"unknown integrator {cfg.integrator!r}")


def max_frequency(params: SystemParams) -> float:
    return max([params.omega_m] + [m.kappa for m in params.modes] + [abs(m.detuning) for m in params.modes])


def _check_nyquist(params: SystemParams, sample_dt: float):
    fastest = max([params.omega_m] + [abs(m.detuning) for m in params.modes])
    if sample_dt * EXACT_NYQUIST_MARGIN * fastest > math.pi:
        raise StepTooLarge(f"sampling step {sample_dt:.3e} s puts the sidebands above Nyquist")


def check_config(params: SystemParams, cfg: SimConfig) -> float:
    """Validate the step and durations; returns Gamma_eff."""
    if not (cfg.dt > 0 and cfg.duration > 0 and cfg.burn_in >= 0):
        raise ValidationError("dt and duration must be > 0, burn_in >= 0")
    if cfg.n_trajectories < 1 or cfg.record_every < 1:
        raise ValidationError("n_trajectories and record_every must be >= 1")
    gamma_eff = slowest_decay_rate(params)
    wmax = max_frequency(params)
    if cfg.integrator == "euler" and cfg.dt > EM_STEP_FACTOR / wmax:
        raise StepTooLarge(f"dt = {cfg.dt:.3e} s exceeds {EM_STEP_FACTOR}/max rate = {EM_STEP_FACTOR / wmax:.3e} s")
    if cfg.integrator == "exact":
        _check_nyquist(params, cfg.dt)
    if cfg.check_invariants:
        if cfg.duration < 50.0 / gamma_eff:
            raise ValidationError(f"duration {cfg.duration:.3e} s is below 50/Gamma_eff = {50.0 / gamma_eff:.3e} s")
        if cfg.burn_in < 10.0 / gamma_eff:
            raise ValidationError(f"burn_in {cfg.burn_in:.3e} s is below 10/Gamma_eff = {10.0 / gamma_eff:.3e} s")
    return gamma_eff


@numba.njit(cache=True)
def _advance(x, phi, lmat, u, out, stride, offset):
    """Run len(u) steps; store every ``stride``-th state (counting from ``offset``)."""
    n = x.shape[0]
    noise = np.empty(n)
    tmp = np.empty(n)
    k = 0
    cnt = offset
    for s in range(u.shape[0]):
        for i in range(0, n, 2):
            r = math.sqrt(-2.0 * math.log(1.0 - u[s, i]))
            th = 2.0 * math.pi * u[s, i + 1]
            noise[i] = r * math.cos(th)
            noise[i + 1] = r * math.sin(th)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += phi[i, j] * x[j] + lmat[i, j] * noise[j]
            tmp[i] = acc
        for i in range(n):
            x[i] = tmp[i]
        cnt += 1
        if cnt == stride:
            cnt = 0
            for i in range(n):
                out[k, i] = x[i]
            k += 1
    return k, cnt


class _Stepper:
    """Chunked integration of one trajectory."""

    def __init__(self, params: SystemParams, cfg: SimConfig, seed_seq: np.random.SeedSequence):
        self.phi, self.lmat = step_matrices(params, cfg)
        self.n = self.phi.shape[0]
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.Philox(seed_seq))
        self.x = np.zeros(self.n)
        if cfg.initial is not None:
            z = np.zeros(self.n // 2, dtype=complex)
            z[: len(cfg.initial)] = cfg.initial
            self.x = np.concatenate([z.real, z.imag])
        self.phase = 0

    def run(self, n_steps: int, stride: int) -> np.ndarray:
        """Advance ``n_steps`` and return the recorded states (rows)."""
        out_all = []
        left = n_steps
        while left > 0:
            m = min(left, self.cfg.chunk_steps)
            u = self.rng.random((m, self.n))
            out = np.empty((m // stride + 1, self.n))
            k, self.phase = _advance(self.x, self.phi, self.lmat, u, out, stride, self.phase)
            out_all.append(out[:k])
            left -= m
        return np.concatenate(out_all) if out_all else np.empty((0, self.n))


def _seeds(cfg: SimConfig):
    return np.random.SeedSequence(cfg.seed).spawn(cfg.n_trajectories)


def simulate(params: SystemParams, cfg: SimConfig) -> Trajectories:
    """Integrate ``n_trajectories`` independent records (rows of the outputs).

    Deterministic given (params, cfg): the Philox streams are spawned from
    ``cfg.seed``.
    """
    check_config(params, cfg)
    n_burn = int(round(cfg.burn_in / cfg.dt))
    n_steps = int(round(cfg.duration / cfg.dt))
    states = []
    for ss in _seeds(cfg):
        st = _Stepper(params, cfg, ss)
        if n_burn:
            st.run(n_burn, n_burn + 1)
            st.phase = 0
        rec = st.run(n_steps, cfg.record_every)
        states.append(rec)
    arr = np.stack(states)
    half = arr.shape[-1] // 2
    z = arr[..., :half] + 1j * arr[..., half:]
    h = cfg.dt * cfg.record_every
    t = cfg.burn_in + h * np.arange(1, z.shape[1] + 1)
    meta = {
        "integrator": cfg.integrator,
        "rng": RNG_NAME,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "params_hash": params_hash(params),
    }
    return Trajectories(t, z[..., 0], z[..., 1], z[..., 2] if half > 2 else None, meta)


class WelchAccumulator:
    """Streaming Welch estimate (Hann window, constant detrend, two-sided density).

    The scaling matches ``scipy.signal.welch(..., return_onesided=False,
    scaling="density")``: a white record of two-sided density D per Hz
    gives a flat D. In angular frequency the same number is S(w) with
    int S dw / (2 pi) equal to the variance.
    """

    def __init__(self, nperseg: int, fs: float, overlap: float = 0.5):
        if not 0.0 <= overlap <= 0.9:
            raise ValidationError(f"overlap must lie in [0, 0.9], got {overlap}")
        if nperseg < 8:
            raise TooFewSamples(f"segment length {nperseg} < 8")
        self.nperseg = nperseg
        self.fs = fs
        self.step = max(1, int(round(nperseg * (1.0 - overlap))))
        self.win = scipy.signal.get_window("hann", nperseg)
        self.scale = 1.0 / (fs * float(np.sum(self.win**2)))
        self.buf = np.empty(0)
        self.sum = np.zeros(nperseg)
        self.sumsq = np.zeros(nperseg)
        self.count = 0

    def add(self, x: np.ndarray):
        self.buf = np.concatenate([self.buf, np.asarray(x, dtype=float)])
        while self.buf.size >= self.nperseg:
            seg = self.buf[: self.nperseg]
            seg = seg - seg.mean()
            p = np.abs(np.fft.fft(seg * self.win)) ** 2 * self.scale
            self.sum += p
            self.sumsq += p * p
            self.count += 1
            self.buf = self.buf[self.step :]

    def result(self, meta: Optional[dict] = None) -> PsdEstimate:
        if self.count == 0:
            raise TooFewSamples("no complete segment accumulated")
        mean = self.sum / self.count
        if self.count > 1:
            var = np.clip(self.sumsq / self.count - mean**2, 0.0, None) * self.count / (self.count - 1)
            se = np.sqrt(var / self.count)
        else:
            se = np.full_like(mean, np.inf)
        f = np.fft.fftfreq(self.nperseg, d=1.0 / self.fs)
        order = np.argsort(f)
        m = {"estimator": "welch-hann", "segments": self.count, "nperseg": self.nperseg}
        m.update(meta or {})
        return PsdEstimate(Spectrum(TWO_PI * f[order], mean[order], m), se[order], self.count)


def estimate_psd(series, fs: float, segment_length: int, overlap: float = 0.5) -> PsdEstimate:
    """Averaged Hann periodogram of a record sampled at ``fs`` Hz.

    A complex ``series`` is read as a field amplitude and converted to
    X = a + a^*. Rows of a 2-d array are independent records.
    """
    arr = np.asarray(series)
    if np.iscomplexobj(arr):
        arr = 2.0 * arr.real
    arr = np.atleast_2d(arr)
    if segment_length > arr.shape[-1]:
        raise TooFewSamples(f"segment length {segment_length} exceeds the record length {arr.shape[-1]}")
    acc = WelchAccumulator(segment_length, fs, overlap)
    for rec in arr:
        acc.add(rec)
        acc.buf = np.empty(0)
    return acc.result()


def langevin_psd(params: SystemParams, cfg: SimConfig, segment_length: int, overlap: float = 0.5) -> PsdEstimate:
    """Integrate and estimate the PSD of X on the fly, without storing records."""
    check_config(params, cfg)
    _check_nyquist(params, cfg.dt * cfg.record_every)
    n_burn = int(round(cfg.burn_in / cfg.dt))
    n_steps = int(round(cfg.duration / cfg.dt))
    fs = 1.0 / (cfg.dt * cfg.record_every)
    acc = WelchAccumulator(segment_length, fs, overlap)
    if n_steps // cfg.record_every < segment_length:
        raise TooFewSamples("duration shorter than one segment")
    block = segment_length * cfg.record_every
    for ss in _seeds(cfg):
        st = _Stepper(params, cfg, ss)
        if n_burn:
            st.run(n_burn, n_burn + 1)
            st.phase = 0
        left = n_steps
        while left > 0:
            m = min(left, block)
            rec = st.run(m, cfg.record_every)
            acc.add(2.0 * rec[:, 1])
            left -= m
        acc.buf = np.empty(0)
    meta = {
        "method": f"langevin-{cfg.integrator}",
        "rng": RNG_NAME,
        "seed": cfg.seed,
        "params_hash": params_hash(params),
    }
    return acc.result(meta)


def write_record(path, t: np.ndarray, z: np.ndarray):
    """Binary dump of one record.

    Layout (little-endian): 8-byte magic ``SBLREC1\\0``, uint64 row count,
    then rows of three float64 (t, X, residual) where X = z + z^* and the
    residual Im(z + z^*) is zero up to rounding.
    """
    xq = z + np.conj(z)
    rows = np.empty((t.size, 3), dtype="<f8")
    rows[:, 0] = t
    rows[:, 1] = xq.real
    rows[:, 2] = xq.imag
    with open(path, "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<Q", t.size))
        fh.write(rows.tobytes())


def read_record(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != RECORD_MAGIC:
            raise ValidationError("not a sideband-lab record file")
        (n,) = struct.unpack("<Q", fh.read(8))
        return np.frombuffer(fh.read(24 * n), dtype="<f8").reshape(n, 3)


__all__ = [
    "SimConfig",
    "Trajectories",
    "PsdEstimate",
    "WelchAccumulator",
    "drift_matrices",
    "step_matrices",
    "slowest_decay_rate",
    "check_config",
    "simulate",
    "estimate_psd",
    "langevin_psd",
    "write_record",
    "read_record",
]
