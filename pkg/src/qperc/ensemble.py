"""Monte Carlo driver: trials, percolation-probability curves, thresholds.

Trials are keyed by ``(P index, trial index)``.  With ``coupled=True`` (the
default) every P shares the lattice seed of a given trial index, so the
occupied set only grows along a sweep.  Trial seeds are

    coupled:      derive_seed(master_seed, trial_index)
    independent:  derive_seed(master_seed, p_index, trial_index)
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import DEFAULT_Z_PER_STEP, classical_threshold_from_ipr, covered_counts
from .clusters import MODES, spanning_onsets
from .errors import DomainError, PropagationError, ValidationError
from .hamiltonian import CouplingModel, build_hamiltonian
from .lattice import LatticeSpec, generate_lattice
from .observables import DEFAULT_PORTION, bound_fraction, percolation_event
from .propagator import evolve_trace, initial_state
from .rng import derive_seed

SCHEMA = "qperc-config/1"

# preset lattice size -> (propagation length in mm, square bound side)
PRESET_SIZES = {40: (20.0, 16), 60: (30.0, 24), 80: (40.0, 32)}


def _default_grid():
    return tuple(round(0.5 + 0.05 * k, 2) for k in range(11))


@dataclass(frozen=True)
class ExperimentConfig:
    spec: LatticeSpec = LatticeSpec(40, 40, 15.0)
    coupling: CouplingModel = CouplingModel()
    z_max: float = 20.0
    z_step: float = 0.5
    bound_side: int = 16
    portion_threshold: float = DEFAULT_PORTION
    P_grid: tuple = field(default_factory=_default_grid)
    trials_per_P: int = 100
    master_seed: int = 20210101
    coupled: bool = True
    spanning_mode: str = "corner"
    z_per_step: float = DEFAULT_Z_PER_STEP
    method: str = "chebyshev"

    def __post_init__(self):
        object.__setattr__(self, "P_grid", tuple(float(p) for p in self.P_grid))
        problems = []
        if not self.z_max >= 0:
            problems.append("z_max_mm")
        if not self.z_step > 0:
            problems.append("z_step_mm")
        if not 1 <= self.bound_side <= min(self.spec.rows, self.spec.cols):
            problems.append("bound_side")
        if not 0 <= self.portion_threshold <= 1:
            problems.append("portion_threshold")
        if not self.P_grid or any(not 0 <= p <= 1 for p in self.P_grid):
            problems.append("P_grid")
        if int(self.trials_per_P) != self.trials_per_P or self.trials_per_P < 1:
            problems.append("trials_per_P")
        if self.spanning_mode not in MODES:
            problems.append("spanning_mode")
        if not self.z_per_step > 0:
            problems.append("z_per_step_mm")
        if self.method not in ("chebyshev", "dense"):
            problems.append("method")
        if problems:
            raise ValidationError(f"invalid config values: {', '.join(problems)}", problems)

    def z_grid(self) -> np.ndarray:
        n = int(round(self.z_max / self.z_step))
        return np.linspace(0.0, n * self.z_step, n + 1)

    def t_grid(self) -> np.ndarray:
        return np.arange(0, int(round(self.z_max / self.z_per_step)) + 1)

    def trial_seed(self, p_index: int, trial_index: int) -> int:
        if self.coupled:
            return derive_seed(self.master_seed, trial_index)
        return derive_seed(self.master_seed, p_index, trial_index)

    # --- (de)serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "lattice": {"rows": self.spec.rows, "cols": self.spec.cols, "pitch_um": self.spec.pitch},
            "coupling": {"t1_per_mm": self.coupling.t1, "beta_per_um": self.coupling.beta,
                         "reference_distance_um": self.coupling.reference_distance},
            "z_max_mm": self.z_max,
            "z_step_mm": self.z_step,
            "bound_side": self.bound_side,
            "portion_threshold": self.portion_threshold,
            "P_grid": list(self.P_grid),
            "trials_per_P": self.trials_per_P,
            "master_seed": self.master_seed,
            "coupled": self.coupled,
            "spanning_mode": self.spanning_mode,
            "z_per_step_mm": self.z_per_step,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object", ["<root>"])
        known = set(cls().to_dict())
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}", unknown)
        if doc.get("schema", SCHEMA) != SCHEMA:
            raise ValidationError(f"unsupported schema {doc.get('schema')!r}", ["schema"])
        base = cls().to_dict()
        bad = []

        lat = doc.get("lattice", base["lattice"])
        cpl = doc.get("coupling", base["coupling"])
        if not isinstance(lat, dict):
            bad.append("lattice")
            lat = base["lattice"]
        if not isinstance(cpl, dict):
            bad.append("coupling")
            cpl = base["coupling"]
        lat = {**base["lattice"], **lat}
        cpl = {**base["coupling"], **cpl}
        for k in set(lat) - set(base["lattice"]):
            bad.append(f"lattice.{k}")
        for k in set(cpl) - set(base["coupling"]):
            bad.append(f"coupling.{k}")

        def conv(key, fn, value):
            try:
                if isinstance(value, bool) and fn is not as_bool:
                    raise TypeError
                return fn(value)
            except (TypeError, ValueError):
                bad.append(key)
                return None

        def as_bool(v):
            if not isinstance(v, bool):
                raise TypeError
            return v

        def as_int(v):
            if isinstance(v, float) and not v.is_integer():
                raise ValueError
            return int(v)

        def as_grid(v):
            if not isinstance(v, (list, tuple)):
                raise TypeError
            return tuple(float(x) for x in v)

        vals = {
            "rows": conv("lattice.rows", as_int, lat["rows"]),
            "cols": conv("lattice.cols", as_int, lat["cols"]),
            "pitch": conv("lattice.pitch_um", float, lat["pitch_um"]),
            "t1": conv("coupling.t1_per_mm", float, cpl["t1_per_mm"]),
            "beta": conv("coupling.beta_per_um", float, cpl["beta_per_um"]),
            "ref": conv("coupling.reference_distance_um", float, cpl["reference_distance_um"]),
        }
        top = {}
        for key, fn in (("z_max_mm", float), ("z_step_mm", float), ("bound_side", as_int),
                        ("portion_threshold", float), ("P_grid", as_grid), ("trials_per_P", as_int),
                        ("master_seed", as_int), ("coupled", as_bool), ("spanning_mode", str),
                        ("z_per_step_mm", float), ("method", str)):
            top[key] = conv(key, fn, doc.get(key, base[key]))
        if bad:
            raise ValidationError(f"invalid config values: {', '.join(sorted(set(bad)))}", sorted(set(bad)))
        try:
            spec = LatticeSpec(vals["rows"], vals["cols"], vals["pitch"])
        except DomainError as exc:
            raise ValidationError(str(exc), ["lattice"]) from None
        try:
            coupling = CouplingModel(vals["t1"], vals["beta"], vals["ref"])
        except DomainError as exc:
            raise ValidationError(str(exc), ["coupling"]) from None
        return cls(spec=spec, coupling=coupling, z_max=top["z_max_mm"], z_step=top["z_step_mm"],
                   bound_side=top["bound_side"], portion_threshold=top["portion_threshold"],
                   P_grid=top["P_grid"], trials_per_P=top["trials_per_P"],
                   master_seed=top["master_seed"], coupled=top["coupled"],
                   spanning_mode=top["spanning_mode"], z_per_step=top["z_per_step_mm"],
                   method=top["method"])


def preset(name: str, **overrides) -> ExperimentConfig:
    """Named size preset (``paper-40/60/80``); z_max and the bound side grow with the lattice."""
    try:
        size = int(name.removeprefix("paper-"))
        z_max, side = PRESET_SIZES[size]
    except (ValueError, KeyError):
        raise ValidationError(f"unknown preset {name!r}; choose from paper-40, paper-60, paper-80",
                              ["preset"]) from None
    cfg = ExperimentConfig(spec=LatticeSpec(size, size, 15.0), z_max=z_max, bound_side=side)
    return replace(cfg, **overrides) if overrides else cfg


# --- trials ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrialResult:
    P: float
    seed: int
    trial_index: int
    z: np.ndarray
    ipr_trace: np.ndarray
    final_bound_fraction: float
    percolated: bool

    def to_dict(self) -> dict:
        return {"P": self.P, "trial_index": self.trial_index, "seed": self.seed,
                "final_bound_fraction": self.final_bound_fraction, "percolated": self.percolated,
                "z_mm": self.z.tolist(), "ipr": self.ipr_trace.tolist()}

    def __eq__(self, other):
        if not isinstance(other, TrialResult):
            return NotImplemented
        return (self.P == other.P and self.seed == other.seed
                and self.trial_index == other.trial_index
                and np.array_equal(self.z, other.z) and np.array_equal(self.ipr_trace, other.ipr_trace)
                and self.final_bound_fraction == other.final_bound_fraction
                and self.percolated == other.percolated)

    __hash__ = None


def run_quantum_trial(config: ExperimentConfig, P: float, trial_index: int,
                      p_index: int = 0) -> TrialResult:
    if not 0.0 <= P <= 1.0:
        raise DomainError(f"occupation probability must lie in [0, 1], got {P}")
    seed = config.trial_seed(p_index, trial_index)
    lattice = generate_lattice(config.spec, P, seed)
    ham = build_hamiltonian(lattice, config.coupling)
    z = config.z_grid()
    try:
        trace = evolve_trace(ham, initial_state(ham, lattice.injection), z, method=config.method)
    except PropagationError as exc:
        raise PropagationError(f"trial {trial_index} at P={P} (seed {seed}): {exc}",
                               P=P, trial_index=trial_index, seed=seed) from exc
    intens = trace.intensities
    totals = intens.sum(axis=1)
    iprs = (intens * intens).sum(axis=1) / (totals * totals)
    frac = bound_fraction(lattice, intens[-1], config.bound_side, ham.site_order)
    return TrialResult(float(P), seed, int(trial_index), z, iprs, frac,
                       percolation_event(frac, config.portion_threshold))


def estimate_percolation_probability(results) -> tuple[float, float]:
    """Pr = n/N with the binomial error sqrt(Pr (1 - Pr) / N)."""
    flags = [r.percolated if hasattr(r, "percolated") else bool(r) for r in results]
    N = len(flags)
    if N < 1:
        raise DomainError("no trials")
    pr = sum(flags) / N
    return pr, math.sqrt(pr * (1.0 - pr) / N)


def _run_task(args):
    config, p_index, trial_index = args
    return run_quantum_trial(config, config.P_grid[p_index], trial_index, p_index)


def _map(fn, tasks, jobs: int):
    if jobs is None or jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def sweep_trials(config: ExperimentConfig, jobs: int = 1) -> dict:
    """All quantum trials, as ``{(p_index, trial_index): TrialResult}``."""
    tasks = [(config, pi, ti) for pi in range(len(config.P_grid)) for ti in range(config.trials_per_P)]
    results = _map(_run_task, tasks, jobs)
    return {(t[1], t[2]): r for t, r in zip(tasks, results)}


# --- curves ----------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    P: float
    Pr: float
    dPr: float
    nP: int
    NP: int


@dataclass(frozen=True)
class TransitionCurve:
    points: tuple
    threshold: float | None
    span: tuple | None
    size: str = ""

    @property
    def span_width(self):
        return None if self.span is None else self.span[1] - self.span[0]

    def summary(self) -> dict:
        return {"size": self.size, "threshold": self.threshold,
                "span": None if self.span is None else list(self.span),
                "span_width": self.span_width}


def crossing(P, Pr, level: float):
    """Leftmost P where the (P, Pr) polyline reaches ``level`` from below."""
    P = list(P)
    Pr = list(Pr)
    for i, y in enumerate(Pr):
        if y >= level:
            if i == 0:
                return float(P[0]) if y == level else None
            x0, y0, x1 = P[i - 1], Pr[i - 1], P[i]
            return float(x0 + (level - y0) * (x1 - x0) / (y - y0))
    return None


def curve_from_points(points, size: str = "") -> TransitionCurve:
    points = tuple(sorted(points, key=lambda p: p.P))
    if len(points) < 2:
        raise DomainError("need at least two P values")
    P = [p.P for p in points]
    Pr = [p.Pr for p in points]
    thr = crossing(P, Pr, 0.5)
    p10, p90 = crossing(P, Pr, 0.1), crossing(P, Pr, 0.9)
    span = (p10, p90) if p10 is not None and p90 is not None else None
    return TransitionCurve(points, thr, span, size)


def curve_from_flags(P_grid, flags_by_p, size: str = "") -> TransitionCurve:
    pts = []
    for P, flags in zip(P_grid, flags_by_p):
        pr, dpr = estimate_percolation_probability(flags)
        pts.append(CurvePoint(float(P), pr, dpr, int(sum(flags)), len(flags)))
    return curve_from_points(pts, size)


def _size_label(config):
    return f"{config.spec.rows}x{config.spec.cols}"


def curve_from_trials(config: ExperimentConfig, trials: dict) -> TransitionCurve:
    flags = [[trials[(pi, ti)].percolated for ti in range(config.trials_per_P)]
             for pi in range(len(config.P_grid))]
    return curve_from_flags(config.P_grid, flags, _size_label(config))


def sweep(config: ExperimentConfig, jobs: int = 1) -> TransitionCurve:
    if len(config.P_grid) < 2:
        raise DomainError("P_grid needs at least two points")
    return curve_from_trials(config, sweep_trials(config, jobs))


def ipr_table(config: ExperimentConfig, trials: dict) -> list[dict]:
    """Per (P, z) ensemble statistics of the IPR."""
    rows = []
    z = config.z_grid()
    for pi, P in enumerate(config.P_grid):
        m = np.array([trials[(pi, ti)].ipr_trace for ti in range(config.trials_per_P)])
        mean = m.mean(axis=0)
        std = m.std(axis=0, ddof=1) if m.shape[0] > 1 else np.zeros_like(mean)
        for k, zk in enumerate(z):
            rows.append({"P": P, "z_mm": float(zk), "mean_IPR": float(mean[k]),
                         "std_IPR": float(std[k]), "w_eff": float(mean[k] ** -0.5),
                         "n_trials": m.shape[0]})
    return rows


def scaling_study(configs, jobs: int = 1) -> dict:
    """One transition curve per lattice size plus pairwise trend checks."""
    curves = [sweep(c, jobs) for c in configs]
    report = []
    for a, b in zip(curves, curves[1:]):
        report.append({
            "from": a.size, "to": b.size,
            "threshold_shift": None if a.threshold is None or b.threshold is None
            else b.threshold - a.threshold,
            "span_change": None if a.span_width is None or b.span_width is None
            else b.span_width - a.span_width,
        })
    return {"curves": curves, "comparison": report}


# --- classical -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClassicalSweep:
    curve: TransitionCurve  # spanning probability
    t_grid: np.ndarray
    mean_ipr: np.ndarray  # (len(P_grid), len(t_grid)) ensemble mean of 1/N
    mean_count: np.ndarray  # (len(P_grid), len(t_grid)) ensemble mean of N
    std_ipr: np.ndarray  # sample standard deviation of 1/N
    t_fixed: int
    knee: dict | None
    knee_error: str | None = None

    def widths(self, average: str = "count") -> np.ndarray:
        """Ensemble effective width per (P, t).

        ``count`` uses sqrt(<N>); ``ipr`` uses <1/N>^(-1/2).
        """
        if average == "count":
            return np.sqrt(self.mean_count)
        if average == "ipr":
            return self.mean_ipr ** -0.5
        raise DomainError(f"unknown average {average!r}")


def _classical_task(args):
    config, p_index, trial_index, t_grid = args
    seed = config.trial_seed(p_index, trial_index)
    P = config.P_grid[p_index]
    lattice = generate_lattice(config.spec, P, seed)
    return covered_counts(lattice, t_grid)


def _onset_task(args):
    spec, seed = args
    return spanning_onsets(spec, seed)


def classical_spanning_curve(config: ExperimentConfig, jobs: int = 1) -> TransitionCurve:
    """Spanning probability per P from one Newman-Ziff pass per distinct seed."""
    nP, nT = len(config.P_grid), config.trials_per_P
    seeds = sorted({config.trial_seed(pi, ti) for pi in range(nP) for ti in range(nT)})
    onsets = dict(zip(seeds, _map(_onset_task, [(config.spec, s) for s in seeds], jobs)))
    flags = [[onsets[config.trial_seed(pi, ti)][config.spanning_mode] < P for ti in range(nT)]
             for pi, P in enumerate(config.P_grid)]
    return curve_from_flags(config.P_grid, flags, _size_label(config))


def run_classical_sweep(config: ExperimentConfig, jobs: int = 1, t_grid=None,
                        knee_resolution: float = 0.01) -> ClassicalSweep:
    if len(config.P_grid) < 2:
        raise DomainError("P_grid needs at least two points")
    t_grid = config.t_grid() if t_grid is None else np.asarray(t_grid, dtype=np.int64)
    t_fixed = int(round(config.z_max / config.z_per_step))
    if t_fixed not in set(t_grid.tolist()):
        t_grid = np.union1d(t_grid, [t_fixed])
    nP, nT = len(config.P_grid), config.trials_per_P

    curve = classical_spanning_curve(config, jobs)
    tasks = [(config, pi, ti, t_grid) for pi in range(nP) for ti in range(nT)]
    counts = np.array(_map(_classical_task, tasks, jobs), dtype=float).reshape(nP, nT, -1)
    mean_ipr = (1.0 / counts).mean(axis=1)
    mean_count = counts.mean(axis=1)
    std_ipr = (1.0 / counts).std(axis=1, ddof=1) if nT > 1 else np.zeros_like(mean_ipr)
    col = int(np.searchsorted(t_grid, t_fixed))
    knee, err = None, None
    try:
        knee = classical_threshold_from_ipr(config.P_grid, mean_ipr[:, col], knee_resolution)
    except DomainError as exc:
        err = str(exc)
    return ClassicalSweep(curve, t_grid, mean_ipr, mean_count, std_ipr, t_fixed, knee, err)


__all__ = [
    "ExperimentConfig", "TrialResult", "TransitionCurve", "CurvePoint", "ClassicalSweep",
    "preset", "run_quantum_trial", "estimate_percolation_probability", "sweep", "sweep_trials",
    "curve_from_trials", "curve_from_points", "crossing", "ipr_table", "scaling_study",
    "run_classical_sweep", "classical_spanning_curve", "PRESET_SIZES", "SCHEMA",
]
