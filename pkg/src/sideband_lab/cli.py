"""Command-line entry point: ``sideband-lab <subcommand> [options]``.

Grid specifications ``min:max:n`` are in Hz (like the params JSON); CSV
outputs use angular frequency. Exit status is 0 on success, 2 on invalid
input and 3 on numerical failure, with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .asymmetry import GridConfig, fit_lorentzian, measure_asymmetry, sideband_spectrum
from .errors import NumericalError, RegimeWarning, ValidationError
from .model import TWO_PI, derive, load_params, params_from_dict, params_hash, params_to_dict
from .response import stability
from .spectrum import ORDERINGS, Spectrum, peak_grid, psd_curve

SUBCOMMANDS = ("spectrum", "asymmetry", "stability", "multitone", "oracle", "sweep")
MIN_GRID_POINTS = 16


@dataclass
class RunConfig:
    subcommand: str
    params: Path
    out: Path
    formats: tuple = ("csv", "json")
    grid: Optional[tuple] = None
    cluster: bool = True
    ordering: str = "symmetric"
    seed: int = 0
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    truncation: int = 1
    duration: float = 20.0
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError(f"unknown subcommand {self.subcommand!r}")
        if not self.params.is_file():
            raise ValidationError(f"params file not found: {self.params}")
        if self.grid is not None and self.grid[2] < MIN_GRID_POINTS:
            raise ValidationError(f"grid needs >= {MIN_GRID_POINTS} points")
        if self.subcommand == "sweep" and (not self.sweep_param or not self.sweep_values):
            raise ValidationError("sweep needs --param and a nonempty --values list")
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ValidationError(f"unknown formats {sorted(bad)}")
        if self.ordering not in ORDERINGS:
            raise ValidationError(f"unknown ordering {self.ordering!r}")


def parse_grid(text: str) -> tuple:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ValidationError(f"grid must be min:max:n, got {text!r}") from None
    if not hi > lo:
        raise ValidationError("grid max must exceed min")
    return lo, hi, n


def thread_count() -> int:
    raw = os.environ.get("SIDEBAND_LAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"SIDEBAND_LAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


# -- output helpers ---------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if hasattr(obj, "__dataclass_fields__"):
        return _clean({k: getattr(obj, k) for k in obj.__dataclass_fields__})
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


class Outputs:
    def __init__(self, cfg: RunConfig, phash: str):
        self.cfg = cfg
        self.phash = phash
        self.csvs: list[Path] = []
        cfg.out.mkdir(parents=True, exist_ok=True)

    def spectrum(self, name: str, spec: Spectrum, label: str = ""):
        if "csv" not in self.cfg.formats:
            return
        spec.meta.update({"params_hash": self.phash, "version": __version__})
        if label:
            spec.meta["label"] = label
        path = self.cfg.out / f"{name}.csv"
        spec.to_csv(path)
        self.csvs.append(path)

    def table(self, name: str, header: Sequence[str], rows):
        if "csv" not in self.cfg.formats:
            return
        path = self.cfg.out / f"{name}.csv"
        with open(path, "w") as fh:
            fh.write(f"# params_hash: {self.phash}\n# version: {__version__}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def report(self, name: str, doc: dict):
        if "json" not in self.cfg.formats:
            return
        doc = {"version": __version__, "params_hash": self.phash, **doc}
        with open(self.cfg.out / f"{name}.json", "w") as fh:
            json.dump(_clean(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


def emit_plot_script(csv_files: Sequence, out_path, markers: Optional[Sequence[float]] = None) -> Path:
    """Write a gnuplot script plotting the given spectrum CSVs.

    One file gives one ``plot`` line; two files are overlaid with optional
    vertical markers (e.g. at -Omega and +Omega); three or more go into a
    multiplot grid.
    """
    out_path = Path(out_path)
    base = out_path.parent
    files = [os.path.relpath(Path(f), base) for f in csv_files]
    lines = [
        "# gnuplot script",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set xlabel 'omega (rad/s)'",
        "set ylabel 'S_XX'",
        "set logscale y",
        "set terminal pngcairo size 1000,700",
        f"set output '{out_path.stem}.png'",
    ]
    if len(files) == 1:
        lines.append(f"plot '{files[0]}' using 1:2 with lines title '{Path(files[0]).stem}'")
    elif len(files) == 2:
        for k, x in enumerate(markers or []):
            lbl = "-Omega" if x < 0 else "+Omega"
            lines.append(f"set arrow {k + 1} from {x!r}, graph 0 to {x!r}, graph 1 nohead dashtype 2")
            lines.append(f"set label {k + 1} '{lbl}' at {x!r}, graph 0.95")
        lines.append(
            "plot " + ", \\\n     ".join(f"'{f}' using 1:2 with lines title '{Path(f).stem}'" for f in files)
        )
    else:
        cols = int(np.ceil(np.sqrt(len(files))))
        rows = int(np.ceil(len(files) / cols))
        lines.append(f"set multiplot layout {rows},{cols}")
        for f in files:
            lines.append(f"plot '{f}' using 1:2 with lines title '{Path(f).stem}'")
        lines.append("unset multiplot")
    out_path.write_text("\n".join(lines) + "\n")
    return out_path


# -- subcommands ------------------------------------------------------------


def _grid(cfg: RunConfig, params) -> np.ndarray:
    if cfg.grid is not None:
        lo, hi, n = cfg.grid
        return TWO_PI * np.linspace(lo, hi, n)
    om = params.omega_m
    d = derive(params)
    mech = peak_grid([-om, om], _mech_width(params), n_per_linewidth=20, halfwidth=10)
    r = params.readout
    cav = peak_grid([-r.detuning, r.detuning], r.kappa, n_per_linewidth=20, halfwidth=10, span=(-1.5 * om, 1.5 * om), n_background=400)
    grid = np.unique(np.concatenate([mech, cav]))
    return grid[np.concatenate([[True], np.diff(grid) > 1e-9 * d.quality_factor ** -1 * om])]


def _mech_width(params) -> float:
    d = derive(params)
    return params.gamma_m * (1 + d.c_cooling + d.c_readout)


def cmd_spectrum(cfg: RunConfig, out: Outputs, params):
    grid = _grid(cfg, params)
    spec = psd_curve(grid, params, cfg.ordering)
    out.spectrum("spectrum", spec)
    peaks = {}
    try:
        peaks["dominant"] = fit_lorentzian(spec)
    except (NumericalError, ValidationError) as exc:
        peaks["dominant"] = {"error": str(exc)}
    for name, center in (("minus_omega", -params.omega_m), ("plus_omega", params.omega_m)):
        lo, hi = center - 10 * _mech_width(params), center + 10 * _mech_width(params)
        sel = (grid >= lo) & (grid <= hi)
        if np.count_nonzero(sel) < MIN_GRID_POINTS:
            continue
        try:
            peaks[name] = fit_lorentzian(Spectrum(grid[sel], spec.values[sel]))
        except (NumericalError, ValidationError) as exc:
            peaks[name] = {"error": str(exc)}
    out.report("spectrum", {"ordering": cfg.ordering, "points": grid.size, "peaks": peaks, "params": params_to_dict(params)})


def _asymmetry_doc(params, gc: GridConfig):
    rep = measure_asymmetry(params, gc)
    d = derive(params)
    doc = rep.to_dict()
    doc.update({"c_readout": d.c_readout, "c_cooling": d.c_cooling, "nbar_mech": params.nbar_mech})
    return rep, doc


def cmd_asymmetry(cfg: RunConfig, out: Outputs, params):
    gc = GridConfig()
    rep, doc = _asymmetry_doc(params, gc)
    for name in ("plus", "minus"):
        out.spectrum(f"sideband_{name}", sideband_spectrum(params, name, gc), label=name)
    out.report("asymmetry", doc)


def cmd_stability(cfg: RunConfig, out: Outputs, params):
    rep = stability(params)
    d = derive(params)
    doc = {
        "stable": rep.stable,
        "max_growth_rate": rep.max_growth_rate,
        "roots": [{"re": float(r.real), "im": float(r.imag)} for r in rep.roots],
        "c_readout": d.c_readout,
        "c_cooling": d.c_cooling,
        "threshold_c_readout": 1 + d.c_cooling,
    }
    out.table("roots", ["re_rad_s", "im_rad_s"], [(r.real, r.imag) for r in rep.roots])
    out.report("stability", doc)


def cmd_multitone(cfg: RunConfig, out: Outputs, _params):
    from .multitone import ceff_from_frame, coherent_spurs, load_toneset, multitone_psd, tone_shift

    ts, mech, occ = load_toneset(cfg.params)
    if mech is None:
        raise ValidationError("multitone file needs omega_m_hz and gamma_m_hz")
    frame = tone_shift(ts, mech)
    doc = {
        "alpha": list(frame.alpha),
        "beta": frame.beta,
        "cavity_shift_rad_s": frame.cavity_shift(),
        "cooperativities": frame.cooperativities(mech),
        "truncation": cfg.truncation,
        "spurs": [{"freq_rad_s": s.freq, "power": s.power} for s in coherent_spurs(ts, mech)],
    }
    if len(ts.tones) >= 2 and ts.delta > 0:
        cp, cm = ceff_from_frame(frame, mech)
        doc["ceff_plus"], doc["ceff_minus"] = cp, cm
        areas = {}
        for name, sgn in (("plus", 1), ("minus", -1)):
            center = ts.omega_cav + sgn * ts.delta
            lw = mech.gamma_m * (1 + abs(cp if sgn > 0 else cm))
            half = min(10 * lw, 0.9 * ts.delta)
            grid = np.linspace(center - half, center + half, 801)
            spec = multitone_psd(grid, ts, mech, occ, cfg.truncation, cfg.ordering, channels=("mechanical",))
            out.spectrum(f"multitone_{name}", spec, label=name)
            try:
                pk = fit_lorentzian(spec)
                areas[name] = pk
            except (NumericalError, ValidationError) as exc:
                areas[name] = {"error": str(exc)}
        doc["peaks"] = areas
    else:
        if cfg.grid is not None:
            grid = TWO_PI * np.linspace(cfg.grid[0], cfg.grid[1], cfg.grid[2])
        else:
            grid = np.linspace(ts.omega_cav - 2 * mech.omega_m, ts.omega_cav + 2 * mech.omega_m, 2001)
        spec = multitone_psd(grid, ts, mech, occ, cfg.truncation, cfg.ordering)
        out.spectrum("multitone", spec)
    out.report("multitone", doc)


def cmd_oracle(cfg: RunConfig, out: Outputs, params):
    from .langevin import SimConfig, langevin_psd, slowest_decay_rate

    gamma_eff = slowest_decay_rate(params)
    fastest = max([params.omega_m] + [abs(m.detuning) for m in params.modes])
    h = np.pi / (1.25 * fastest)
    seg_time = max(20.0 / gamma_eff, 0.05)
    sim = SimConfig(dt=h, duration=max(cfg.duration, 50 / gamma_eff), seed=cfg.seed, burn_in=10 / gamma_eff, integrator="exact")
    est = langevin_psd(params, sim, int(round(seg_time / h)), 0.5)
    results = {}
    for name, center in (("minus_omega", -params.omega_m), ("plus_omega", params.omega_m)):
        w = est.window(center - 5 * gamma_eff, center + 5 * gamma_eff)
        exact = psd_curve(w.spectrum.grid, params).values
        z = (w.spectrum.values - exact) / w.stderr
        results[name] = {"bins": int(z.size), "fraction_within_3se": float(np.mean(np.abs(z) < 3))}
        out.table(f"oracle_{name}", ["omega_rad_s", "psd_langevin", "stderr", "psd_exact"], zip(w.spectrum.grid, w.spectrum.values, w.stderr, exact))
    out.report("oracle", {"seed": cfg.seed, "segments": est.n_segments, "dt": h, "duration": sim.duration, "windows": results})


def _set_path(doc: dict, path: str, value):
    node = doc
    parts = path.split(".")
    for p in parts[:-1]:
        node = node[int(p)] if isinstance(node, list) else node[p]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        if last not in node:
            raise ValidationError(f"sweep path {path!r} does not name an existing field")
        node[last] = value


def cmd_sweep(cfg: RunConfig, out: Outputs, params):
    base = params_to_dict(params)
    gc = GridConfig()

    def point(value):
        doc = copy.deepcopy(base)
        try:
            _set_path(doc, cfg.sweep_param, value)
        except (KeyError, IndexError, ValueError):
            raise ValidationError(f"bad sweep path {cfg.sweep_param!r}") from None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            p = params_from_dict(doc)
        return _asymmetry_doc(p, gc)[1]

    with ThreadPoolExecutor(max_workers=min(thread_count(), len(cfg.sweep_values))) as pool:
        docs = list(pool.map(point, cfg.sweep_values))
    out.table("sweep", [cfg.sweep_param, "zeta_empirical", "zeta_analytic", "relative_gap"],
              [(v, d["zeta_empirical"], d["zeta_analytic"], d["relative_gap"]) for v, d in zip(cfg.sweep_values, docs)])
    zs = np.array([d["zeta_empirical"] for d in docs])
    spread = float((zs.max() - zs.min()) / abs(zs.mean())) if zs.size and zs.mean() != 0 else 0.0
    out.report("sweep", {"param": cfg.sweep_param, "values": list(cfg.sweep_values), "points": docs, "relative_spread": spread})


COMMANDS = {
    "spectrum": cmd_spectrum,
    "asymmetry": cmd_asymmetry,
    "stability": cmd_stability,
    "multitone": cmd_multitone,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
}


def run(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.subcommand == "multitone":
        phash = _file_hash(cfg.params)
        params = None
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            params = load_params(cfg.params)
        phash = params_hash(params)
    np.random.seed(cfg.seed)
    out = Outputs(cfg, phash)
    COMMANDS[cfg.subcommand](cfg, out, params)
    if out.csvs:
        markers = None
        if params is not None and len(out.csvs) == 2:
            markers = [-params.omega_m, params.omega_m]
        emit_plot_script(out.csvs, cfg.out / "plot.gp", markers)
    return 0


def _file_hash(path) -> str:
    import hashlib

    with open(path) as fh:
        doc = json.load(fh)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sideband-lab", description="Sideband spectra of linear optomechanical systems.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--params", required=True, type=Path, help="params JSON (tone-set JSON for multitone)")
    ap.add_argument("--grid", type=parse_grid, help="min:max:n in Hz (write --grid=-a:b:n for a negative min)")
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--format", default="csv,json", help="comma-separated subset of csv,json")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ordering", default="symmetric", choices=ORDERINGS)
    ap.add_argument("--param", dest="sweep_param", help="sweep: dotted path into the params JSON")
    ap.add_argument("--values", default="", help="sweep: comma-separated values")
    ap.add_argument("--truncation", type=int, default=1, help="multitone harmonic truncation order")
    ap.add_argument("--duration", type=float, default=20.0, help="oracle: simulated seconds")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        values = tuple(float(v) for v in ns.values.split(",") if v.strip())
        cfg = RunConfig(
            subcommand=ns.subcommand,
            params=ns.params,
            out=ns.out,
            formats=tuple(f.strip() for f in ns.format.split(",") if f.strip()),
            grid=ns.grid,
            ordering=ns.ordering,
            seed=ns.seed,
            sweep_param=ns.sweep_param,
            sweep_values=values,
            truncation=ns.truncation,
            duration=ns.duration,
        )
        return run(cfg)
    except (ValidationError, json.JSONDecodeError, OSError, ValueError) as exc:
        print(f"sideband-lab: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sideband-lab: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
