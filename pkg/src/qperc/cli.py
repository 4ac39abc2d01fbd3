"""Command-line front end.

Exit statuses: 0 success, 2 usage, 3 validation, 4 I/O or missing input,
5 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .clusters import label_clusters
from .ensemble import (ExperimentConfig, PRESET_SIZES, curve_from_trials, ipr_table, preset,
                       run_classical_sweep, sweep_trials)
from .errors import DependencyError, DomainError, PropagationError, ResourceError, ValidationError
from .hamiltonian import DEFAULT_RATIO, DEFAULT_T1, CouplingModel, build_hamiltonian
from .lattice import LatticeSpec, dumps_lattice, from_text_grid, generate_lattice, loads_lattice, to_text_grid
from .observables import fit_exponent
from .outputs import (FIT_COLUMNS, IPR_COLUMNS, read_csv, write_csv, write_curve_csv, write_grid_csv,
                      write_json, write_jsonl)
from .propagator import evolve_trace, initial_state, write_trace_binary, write_trace_csv

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4, 5


def _probability(text):
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {p}")
    return p


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _rows_cols(text):
    v = _positive_int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"must be >= 2, got {v}")
    return v


def _seed(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None


def _default_jobs():
    env = os.environ.get("QPERC_JOBS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _add_lattice_flags(p, required=True):
    p.add_argument("--rows", type=_rows_cols, default=40)
    p.add_argument("--cols", type=_rows_cols, default=40)
    p.add_argument("--pitch-um", type=_positive_float, default=15.0)
    p.add_argument("--p", type=_probability, required=required, default=None if required else 1.0)
    p.add_argument("--seed", type=_seed, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qperc", description="Quantum and classical site percolation "
                                     "on honeycomb waveguide lattices.")
    parser.add_argument("--version", action="version", version=f"qperc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random lattice")
    _add_lattice_flags(g)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--format", choices=("json", "grid"), default=None,
                   help="default: grid for .txt outputs, json otherwise")

    e = sub.add_parser("evolve", help="propagate a photon injected at the central site")
    e.add_argument("--lattice", type=Path, help="lattice JSON or text grid; else generate from flags")
    _add_lattice_flags(e, required=False)
    e.add_argument("--zmax", type=_nonneg_float, default=20.0)
    e.add_argument("--zstep", type=_positive_float, default=0.5)
    e.add_argument("--t1", type=_positive_float, default=DEFAULT_T1, help="nearest coupling, 1/mm")
    e.add_argument("--ratio", type=_positive_float, default=DEFAULT_RATIO, help="t2 / t1")
    e.add_argument("--out-dir", type=Path, required=True)
    e.add_argument("--binary", action="store_true", help="also write the compact binary trace")

    s = sub.add_parser("sweep", help="Monte Carlo percolation-probability sweep")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="qperc-config/1 JSON file")
    src.add_argument("--preset", choices=[f"paper-{k}" for k in PRESET_SIZES])
    src.add_argument("--manifest", type=Path, help="rerun the configuration recorded in a manifest")
    s.add_argument("--regime", choices=("quantum", "classical"), default=None)
    s.add_argument("--trials", type=_positive_int)
    s.add_argument("--master-seed", type=_seed)
    s.add_argument("--grid", type=_probability, nargs="+", help="occupation probabilities")
    s.add_argument("--jobs", type=_positive_int, default=None)
    s.add_argument("--out-dir", type=Path, required=True)

    f = sub.add_parser("figures", help="derive per-figure CSVs from sweep outputs")
    f.add_argument("--sweep", type=Path, action="append", required=True, dest="sweeps",
                   help="sweep output directory (repeatable)")
    f.add_argument("--out-dir", type=Path, required=True)
    return parser


# --- generate / evolve -------------------------------------------------------

def cmd_generate(args) -> int:
    spec = LatticeSpec(args.rows, args.cols, args.pitch_um)
    lattice = generate_lattice(spec, args.p, args.seed)
    fmt = args.format or ("grid" if args.out.suffix == ".txt" else "json")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(to_text_grid(lattice) if fmt == "grid" else dumps_lattice(lattice) + "\n")
    lab = label_clusters(lattice)
    print(f"occupied fraction {lattice.n_occupied / spec.n_sites:.6f}")
    print(f"largest cluster {lab.cluster_sizes[lab.largest()]}")
    return EXIT_OK


def _load_lattice(path: Path, pitch: float):
    try:
        text = path.read_text()
    except OSError as exc:
        raise DependencyError(f"cannot read lattice file {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        return loads_lattice(text)
    return from_text_grid(text, pitch)


def cmd_evolve(args) -> int:
    if args.lattice is not None:
        lattice = _load_lattice(args.lattice, args.pitch_um)
    else:
        lattice = generate_lattice(LatticeSpec(args.rows, args.cols, args.pitch_um), args.p, args.seed)
    model = CouplingModel.from_ratio(args.t1, args.ratio, lattice.spec.pitch)
    ham = build_hamiltonian(lattice, model)
    n = int(round(args.zmax / args.zstep))
    z = np.linspace(0.0, n * args.zstep, n + 1)
    trace = evolve_trace(ham, initial_state(ham, lattice.injection), z)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    if args.binary:
        write_trace_binary(trace, out / "trace.bin")
    grid = np.zeros(lattice.spec.n_sites)
    grid[ham.site_order] = trace.intensities[-1]
    write_grid_csv(out / "final_section.csv", grid.reshape(lattice.spec.rows, lattice.spec.cols))
    (out / "lattice.json").write_text(dumps_lattice(lattice) + "\n")
    print(f"wrote {trace.z_samples.size} frames over {ham.dimension} sites to {out}")
    return EXIT_OK


# --- sweep -------------------------------------------------------------------

def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DependencyError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})", ["<root>"]) from None


def _resolve_config(args) -> tuple[ExperimentConfig, str]:
    regime = args.regime
    if args.manifest is not None:
        man = _load_json(args.manifest)
        if "config" not in man:
            raise ValidationError("manifest has no config", ["config"])
        cfg = ExperimentConfig.from_dict(man["config"])
        regime = regime or man.get("regime", "quantum")
    elif args.config is not None:
        cfg = ExperimentConfig.from_dict(_load_json(args.config))
    else:
        cfg = preset(args.preset or "paper-40")
    over = {}
    if args.trials is not None:
        over["trials_per_P"] = args.trials
    seed_env = os.environ.get("QPERC_MASTER_SEED")
    if args.master_seed is not None:
        over["master_seed"] = args.master_seed
    elif seed_env and args.manifest is None:
        over["master_seed"] = int(seed_env, 0)
    if args.grid:
        over["P_grid"] = tuple(args.grid)
    if over:
        doc = cfg.to_dict()
        doc.update({k: list(v) if k == "P_grid" else v for k, v in over.items()})
        cfg = ExperimentConfig.from_dict(doc)
    return cfg, regime or "quantum"


def _fits(regime, P_grid, z, widths):
    rows = []
    for P, w in zip(P_grid, widths):
        try:
            f = fit_exponent(z, w)
        except DomainError:
            continue
        rows.append((regime, P, f.nu, f.intercept, f.residual))
    return rows


def cmd_sweep(args) -> int:
    cfg, regime = _resolve_config(args)
    jobs = args.jobs or _default_jobs()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    size = f"{cfg.spec.rows}x{cfg.spec.cols}"
    if regime == "quantum":
        trials = sweep_trials(cfg, jobs)
        curve = curve_from_trials(cfg, trials)
        table = ipr_table(cfg, trials)
        written.append(write_jsonl(out / "trials.jsonl",
                                   (trials[k].to_dict() for k in sorted(trials))))
        written.append(write_csv(out / "ipr.csv", IPR_COLUMNS,
                                 ({"regime": "quantum", **r} for r in table)))
        z = cfg.z_grid()
        widths = np.array([r["w_eff"] for r in table]).reshape(len(cfg.P_grid), z.size)
        written.append(write_csv(out / "fits.csv", FIT_COLUMNS, _fits("quantum", cfg.P_grid, z, widths)))
        summary = {"regime": "quantum", **curve.summary()}
    else:
        cs = run_classical_sweep(cfg, jobs)
        curve = cs.curve
        z = cs.t_grid * cfg.z_per_step
        widths = cs.widths("count")
        rows = []
        for pi, P in enumerate(cfg.P_grid):
            for k, zk in enumerate(z):
                rows.append(("classical", P, float(zk), cs.mean_ipr[pi, k], cs.std_ipr[pi, k],
                             widths[pi, k], cfg.trials_per_P))
        written.append(write_csv(out / "ipr.csv", IPR_COLUMNS, rows))
        written.append(write_csv(out / "fits.csv", FIT_COLUMNS, _fits("classical", cfg.P_grid, z, widths)))
        knee = {"knee": cs.knee, "error": cs.knee_error, "t_fixed": cs.t_fixed,
                "z_fixed_mm": cs.t_fixed * cfg.z_per_step}
        written.append(write_json(out / "knee.json", knee))
        summary = {"regime": "classical", "spanning_mode": cfg.spanning_mode, **curve.summary(),
                   "ipr_knee": None if cs.knee is None else cs.knee["knee"]}
    summary["size"] = size
    summary["P_grid"] = list(cfg.P_grid)
    summary["trials_per_P"] = cfg.trials_per_P
    written.insert(0, write_curve_csv(out / "curve.csv", curve))
    written.append(write_json(out / "summary.json", summary))
    written.append(write_json(out / "config.json", cfg.to_dict()))
    manifest = {
        "config": cfg.to_dict(),
        "regime": regime,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "output_paths": sorted(p.name for p in written) + ["manifest.json"],
    }
    write_json(out / "manifest.json", manifest)
    thr = "none" if curve.threshold is None else f"{curve.threshold:.4f}"
    print(f"{regime} sweep {size}: threshold {thr}, span {curve.span}")
    return EXIT_OK


# --- figures -----------------------------------------------------------------

def _require(path: Path) -> Path:
    if not path.is_file():
        raise DependencyError(f"missing input file: {path}")
    return path


def _log10(v):
    return math.log10(v) if v > 0 else None


def cmd_figures(args) -> int:
    quantum, classical = [], []
    for d in args.sweeps:
        summary = _load_json(_require(d / "summary.json"))
        entry = {"dir": d, "summary": summary,
                 "ipr": read_csv(_require(d / "ipr.csv")),
                 "curve": read_csv(_require(d / "curve.csv")),
                 "fits": read_csv(_require(d / "fits.csv"))}
        (quantum if summary.get("regime") == "quantum" else classical).append(entry)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def width_rows(entry):
        for r in entry["ipr"]:
            z, w = float(r["z_mm"]), float(r["w_eff"])
            yield (r["P"], z, w, _log10(z), _log10(w))

    cols = ("P", "z_mm", "w_eff", "log10_z", "log10_w_eff")
    if quantum:
        q = quantum[0]
        written.append(write_csv(out / "fig3a_quantum_width.csv", cols, width_rows(q)))
        zmax = max(float(r["z_mm"]) for r in q["ipr"])
        written.append(write_csv(out / "fig3c_quantum_ipr_vs_P.csv",
                                 ("P", "z_mm", "mean_IPR", "std_IPR", "w_eff", "n_trials"),
                                 ((r["P"], r["z_mm"], r["mean_IPR"], r["std_IPR"], r["w_eff"], r["n_trials"])
                                  for r in q["ipr"] if float(r["z_mm"]) == zmax)))
    if classical:
        c = classical[0]
        written.append(write_csv(out / "fig3b_classical_width.csv", cols, width_rows(c)))
        zmax = max(float(r["z_mm"]) for r in c["ipr"])
        written.append(write_csv(out / "fig3d_classical_ipr_vs_P.csv",
                                 ("P", "z_mm", "mean_IPR", "std_IPR", "w_eff", "n_trials"),
                                 ((r["P"], r["z_mm"], r["mean_IPR"], r["std_IPR"], r["w_eff"], r["n_trials"])
                                  for r in c["ipr"] if float(r["z_mm"]) == zmax)))
    nu_rows = [(f["regime"], f["P"], f["nu"], f["intercept"], f["residual"])
               for e in quantum[:1] + classical[:1] for f in e["fits"]]
    written.append(write_csv(out / "fig3_nu_vs_P.csv", FIT_COLUMNS, nu_rows))
    fig4 = [(e["summary"]["size"], r["P"], r["Pr"], r["dPr"], r["nP"], r["NP"])
            for e in quantum for r in e["curve"]]
    written.append(write_csv(out / "fig4a_transition.csv", ("size", "P", "Pr", "dPr", "nP", "NP"), fig4))
    print(f"wrote {len(written)} figure datasets to {out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "evolve": cmd_evolve, "sweep": cmd_sweep, "figures": cmd_figures}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"qperc: validation error: {exc}", file=sys.stderr)
        if exc.keys:
            print(f"qperc: offending keys: {', '.join(exc.keys)}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DependencyError, OSError) as exc:
        print(f"qperc: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PropagationError, ResourceError) as exc:
        print(f"qperc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"qperc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
