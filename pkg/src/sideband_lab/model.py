"""Physical parameters of the two-cavity + mechanics linear model.

All frequencies are angular (rad/s). The JSON document format uses plain
frequencies in Hz (``*_hz`` keys); conversion by 2*pi happens only in
:func:`params_from_dict` / :func:`params_to_dict`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional

from .errors import (
    NegativeOccupancy,
    NoReadoutMode,
    NonPositiveFrequency,
    ParameterError,
    RegimeWarning,
    TooManyModes,
)

TWO_PI = 2.0 * math.pi

Role = Literal["readout", "cooling"]


@dataclass(frozen=True)
class CavityMode:
    """One linearised cavity mode in its drive frame.

    Attributes:
        detuning: drive minus cavity frequency, Delta_j (rad/s).
        kappa: energy decay rate kappa_j (rad/s).
        g: linearised optomechanical coupling g_j (rad/s).
        nbar: thermal occupancy of the cavity bath.
        role: ``"readout"`` or ``"cooling"``.
    """

    detuning: float
    kappa: float
    g: float
    nbar: float = 0.0
    role: Role = "readout"


@dataclass(frozen=True)
class SystemParams:
    omega_m: float
    gamma_m: float
    nbar_mech: float
    modes: tuple[CavityMode, ...]
    # regime flags, filled in by validate_params
    weak_coupling: Optional[bool] = field(default=None, compare=False)
    resolved_sideband: Optional[bool] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def readout(self) -> CavityMode:
        for m in self.modes:
            if m.role == "readout":
                return m
        raise NoReadoutMode("modes", "no mode has role 'readout'")

    @property
    def cooling(self) -> Optional[CavityMode]:
        for m in self.modes:
            if m.role == "cooling":
                return m
        return None

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_readout(self, **changes) -> "SystemParams":
        modes = tuple(
            dataclasses.replace(m, **changes) if m.role == "readout" else m
            for m in self.modes
        )
        return dataclasses.replace(self, modes=modes)

    def with_cooling(self, **changes) -> "SystemParams":
        if self.cooling is None:
            raise ParameterError("modes", "no cooling mode to modify")
        modes = tuple(
            dataclasses.replace(m, **changes) if m.role == "cooling" else m
            for m in self.modes
        )
        return dataclasses.replace(self, modes=modes)


@dataclass(frozen=True)
class DerivedQuantities:
    cooperativity: tuple[float, ...]
    xi: tuple[float, ...]
    quality_factor: float
    c_readout: float
    c_cooling: float
    ceff_plus: float
    ceff_minus: float


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise NonPositiveFrequency(name, f"must be finite and > 0, got {value!r}")


def _check_occupancy(name, value):
    if not (value >= 0 and math.isfinite(value)):
        raise NegativeOccupancy(name, f"must be finite and >= 0, got {value!r}")


def validate_params(raw: SystemParams) -> SystemParams:
    """Check all invariants and attach regime flags.

    Regime flags are advisory: a :class:`RegimeWarning` is emitted when a
    flag is false, but no error is raised.
    """
    _check_positive("omega_m", raw.omega_m)
    _check_positive("gamma_m", raw.gamma_m)
    _check_occupancy("nbar_mech", raw.nbar_mech)
    if len(raw.modes) == 0:
        raise NoReadoutMode("modes", "at least one cavity mode is required")
    if len(raw.modes) > 2:
        raise TooManyModes("modes", f"at most 2 cavity modes, got {len(raw.modes)}")
    roles = [m.role for m in raw.modes]
    for i, m in enumerate(raw.modes):
        if m.role not in ("readout", "cooling"):
            raise ParameterError(f"modes[{i}].role", f"unknown role {m.role!r}")
        _check_positive(f"modes[{i}].kappa", m.kappa)
        if not math.isfinite(m.detuning):
            raise ParameterError(f"modes[{i}].detuning", "must be finite")
        if not (m.g >= 0 and math.isfinite(m.g)):
            raise ParameterError(f"modes[{i}].g", f"must be finite and >= 0, got {m.g!r}")
        _check_occupancy(f"modes[{i}].nbar", m.nbar)
    if roles.count("readout") != 1:
        raise NoReadoutMode("modes", f"exactly one readout mode required, got {roles.count('readout')}")
    if roles.count("cooling") > 1:
        raise TooManyModes("modes", "at most one cooling mode")

    weak = all(m.g < m.kappa and m.g < raw.omega_m for m in raw.modes)
    resolved = all(m.kappa < raw.omega_m for m in raw.modes)
    if not weak:
        warnings.warn("parameters outside the weak-coupling regime (g_j < kappa_j, Omega)", RegimeWarning, stacklevel=2)
    if not resolved:
        warnings.warn("parameters outside the resolved-sideband regime (kappa_j < Omega)", RegimeWarning, stacklevel=2)
    return dataclasses.replace(raw, weak_coupling=weak, resolved_sideband=resolved)


def cooperativity(g: float, gamma_m: float, kappa: float) -> float:
    return 4.0 * g * g / (gamma_m * kappa)


def coupling_for_cooperativity(c: float, gamma_m: float, kappa: float) -> float:
    """Inverse of :func:`cooperativity`: the g giving cooperativity ``c``."""
    return math.sqrt(c * gamma_m * kappa / 4.0)


def derive(params: SystemParams) -> DerivedQuantities:
    coop = tuple(cooperativity(m.g, params.gamma_m, m.kappa) for m in params.modes)
    xi = tuple(m.g / m.kappa for m in params.modes)
    c_r = cooperativity(params.readout.g, params.gamma_m, params.readout.kappa)
    cool = params.cooling
    c_c = 0.0 if cool is None else cooperativity(cool.g, params.gamma_m, cool.kappa)
    return DerivedQuantities(
        cooperativity=coop,
        xi=xi,
        quality_factor=params.omega_m / params.gamma_m,
        c_readout=c_r,
        c_cooling=c_c,
        ceff_plus=c_c - c_r,
        ceff_minus=c_c + c_r,
    )


def make_params(
    omega_m: float,
    gamma_m: float,
    kappa_r: float,
    g_r: float,
    detuning_r: float = 0.0,
    nbar_r: float = 0.0,
    nbar_mech: float = 0.0,
    kappa_c: Optional[float] = None,
    g_c: Optional[float] = None,
    nbar_c: float = 0.0,
    detuning_c: Optional[float] = None,
) -> SystemParams:
    """Convenience constructor; a cooling mode is added when ``g_c`` is given.

    The cooling mode defaults to the red sideband (detuning -omega_m) and to
    the readout linewidth.
    """
    modes = [CavityMode(detuning_r, kappa_r, g_r, nbar_r, "readout")]
    if g_c is not None:
        modes.append(
            CavityMode(
                -omega_m if detuning_c is None else detuning_c,
                kappa_r if kappa_c is None else kappa_c,
                g_c,
                nbar_c,
                "cooling",
            )
        )
    return validate_params(SystemParams(omega_m, gamma_m, nbar_mech, tuple(modes)))


def params_from_dict(doc: dict) -> SystemParams:
    """Build validated params from the JSON document (frequencies in Hz)."""
    try:
        modes = tuple(
            CavityMode(
                detuning=TWO_PI * float(m.get("detuning_hz", 0.0)),
                kappa=TWO_PI * float(m["kappa_hz"]),
                g=TWO_PI * float(m["g_hz"]),
                nbar=float(m.get("nbar", 0.0)),
                role=m.get("role", "readout"),
            )
            for m in doc["modes"]
        )
        raw = SystemParams(
            omega_m=TWO_PI * float(doc["omega_m_hz"]),
            gamma_m=TWO_PI * float(doc["gamma_m_hz"]),
            nbar_mech=float(doc.get("nbar_mech", 0.0)),
            modes=modes,
        )
    except KeyError as exc:
        raise ParameterError(str(exc.args[0]), "missing required key") from None
    except (TypeError, ValueError) as exc:
        raise ParameterError("document", str(exc)) from None
    return validate_params(raw)


def _hz(x: float) -> float:
    # 15 significant digits absorbs the 1-ulp error of the 2*pi round trip
    return float(f"{x / TWO_PI:.15g}")


def params_to_dict(params: SystemParams) -> dict:
    return {
        "omega_m_hz": _hz(params.omega_m),
        "gamma_m_hz": _hz(params.gamma_m),
        "nbar_mech": params.nbar_mech,
        "modes": [
            {
                "role": m.role,
                "detuning_hz": _hz(m.detuning),
                "kappa_hz": _hz(m.kappa),
                "g_hz": _hz(m.g),
                "nbar": m.nbar,
            }
            for m in params.modes
        ],
    }


def load_params(path) -> SystemParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))


def params_hash(params: SystemParams) -> str:
    """Short stable digest of the physical parameters (flags excluded)."""
    doc = params_to_dict(params)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def bose_occupancy(frequency_hz: float, temperature_k: float) -> float:
    """Bose-Einstein occupancy; CLI convenience only."""
    h = 6.62607015e-34
    kb = 1.380649e-23
    if temperature_k <= 0:
        return 0.0
    return 1.0 / math.expm1(h * frequency_hz / (kb * temperature_k))
