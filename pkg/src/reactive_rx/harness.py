"""Configuration-driven experiment runner.

A spec file is flat ``key = value`` text with dotted sections::

    # reference geometry, lengths in micrometres
    params.a_um = 0.5
    params.r0_um = 1
    params.D_A = 5e-9
    params.k_f = 3.14e-14
    params.N_A = 1000
    sim.dt_s = 1e-7
    sim.horizon_s = 5e-4
    sim.trials = 200
    sim.seed = 1
    sweep.k_b_per_s = 0, 4e3
    run.modes = analytic, simulate, compare

Unit suffixes are stripped from key names; ``_um`` values are converted
from micrometres to metres, the others (``_m``, ``_s``, ``_per_s``,
``_m2_per_s``, ``_m3_per_s``) are already SI. Sweep keys form a cartesian
product. Every (sweep point, mode) pair produces one CSV series and one
line of ``manifest.txt``.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__, analytic, oracle, sim
from .errors import ConfigError, GridMismatch, ParameterError, ReactiveRxError
from .params import FIELDS, ChannelParams, validate
from .series import SignalSeries

logger = logging.getLogger(__name__)

MODES = ("analytic", "oracle", "simulate", "compare")
UNIT_SUFFIXES = {"_um": 1e-6, "_m3_per_s": 1.0, "_m2_per_s": 1.0, "_per_s": 1.0, "_m": 1.0, "_s": 1.0}
SIM_KEYS = {"dt": float, "horizon": float, "trials": int, "seed": int, "record_every": int, "workers": int}
GRID_KEYS = {"points": int, "t_min": float, "t_max": float}

# acceptance thresholds used by --strict
SIM_SE_BAND = 3.5
SIM_REL_FLOOR = 0.05
SIM_MIN_COUNT = 10.0
SIM_PASS_FRACTION = 0.95
ORACLE_MAX_REL = 1e-6


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: base parameters, optional simulation, sweep and modes."""

    params: ChannelParams
    sim: sim.SimConfig | None = None
    sweep: dict = field(default_factory=dict)
    outputs: Path = Path("out")
    modes: tuple = ("analytic",)
    grid_points: int = 200
    t_min: float | None = None
    t_max: float | None = None
    sim_workers: int = 1
    name: str = "experiment"

    def __post_init__(self):
        if not self.modes:
            raise ConfigError("at least one mode is required")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ConfigError(f"unknown modes: {sorted(unknown)}")
        if "simulate" in self.modes and self.sim is None:
            raise ConfigError("mode 'simulate' needs sim.* settings")
        if self.grid_points < 2:
            raise ConfigError("grid.points must be >= 2")
        for key, values in self.sweep.items():
            if key not in FIELDS:
                raise ConfigError(f"cannot sweep {key!r}; choose from {FIELDS}")
            if not values:
                raise ConfigError(f"sweep.{key} has no values")
        # every sweep point must be a valid parameter set
        for point in self.points():
            self.params_at(point)

    def points(self) -> list[dict]:
        keys = list(self.sweep)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.sweep.values())]

    def params_at(self, point: dict) -> ChannelParams:
        try:
            return self.params.replace(**point)
        except ParameterError as exc:
            raise ConfigError(f"sweep point {point}: {exc}") from exc

    def time_grid(self) -> np.ndarray:
        """Log-spaced output times; snapped to recorded steps when simulating."""
        if self.sim is not None:
            steps = self.record_steps()
            return steps * self.sim.dt
        if self.t_max is None:
            raise ConfigError("analytic-only runs need grid.t_max_s (or sim.* settings)")
        t_min = self.t_min if self.t_min is not None else self.t_max * 1e-4
        if not 0 < t_min < self.t_max:
            raise ConfigError("grid needs 0 < t_min < t_max")
        return np.geomspace(t_min, self.t_max, self.grid_points)

    def record_steps(self) -> np.ndarray:
        cfg = self.sim
        first = cfg.dt * cfg.record_every
        times = np.geomspace(first, cfg.n_steps * cfg.dt, self.grid_points)
        blocks = np.rint(times / first).astype(np.int64)
        steps = np.unique(np.clip(blocks, 1, cfg.n_steps // cfg.record_every)) * cfg.record_every
        return steps


def _split_unit(key):
    for suffix in sorted(UNIT_SUFFIXES, key=len, reverse=True):
        if key.endswith(suffix):
            return key[: -len(suffix)], UNIT_SUFFIXES[suffix]
    return key, 1.0


def _number(text, key):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None


def _integer(text, key):
    value = _number(text, key)
    if value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(value)


def parse_spec(text: str, name: str = "experiment") -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from spec-file text."""
    params, sim_fields, grid, sweep = {}, {}, {}, {}
    modes, outputs = ("analytic",), Path("out")
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        seen.add(key)
        section, _, rest = key.partition(".")
        if not rest:
            raise ConfigError(f"line {lineno}: key {key!r} has no section")
        base, scale = _split_unit(rest)
        if section == "params":
            if base not in FIELDS:
                raise ConfigError(f"line {lineno}: unknown parameter {rest!r}")
            params[base] = _number(value, key) * scale
        elif section == "sweep":
            if base not in FIELDS:
                raise ConfigError(f"line {lineno}: unknown sweep parameter {rest!r}")
            items = [v.strip() for v in value.split(",") if v.strip()]
            sweep[base] = [_number(v, key) * scale for v in items]
        elif section == "sim":
            if base not in SIM_KEYS:
                raise ConfigError(f"line {lineno}: unknown sim setting {rest!r}")
            convert = _integer if SIM_KEYS[base] is int else _number
            sim_fields[base] = convert(value, key) * (scale if SIM_KEYS[base] is float else 1)
        elif section == "grid":
            if base not in GRID_KEYS:
                raise ConfigError(f"line {lineno}: unknown grid setting {rest!r}")
            convert = _integer if GRID_KEYS[base] is int else _number
            grid[base] = convert(value, key) * (scale if GRID_KEYS[base] is float else 1)
        elif section == "run":
            if rest == "modes":
                modes = tuple(m.strip() for m in value.split(",") if m.strip())
            elif rest == "out":
                outputs = Path(value)
            elif rest == "name":
                name = value
            else:
                raise ConfigError(f"line {lineno}: unknown run setting {rest!r}")
        else:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")

    missing = [f for f in ("a", "r0", "D_A", "k_f") if f not in params]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")
    try:
        base_params = validate(**params)
    except ParameterError as exc:
        raise ConfigError(f"invalid parameters: {'; '.join(map(str, exc.violations))}") from exc

    workers = sim_fields.pop("workers", 1)
    config = None
    if sim_fields:
        if "dt" not in sim_fields or "horizon" not in sim_fields:
            raise ConfigError("sim settings need both sim.dt_s and sim.horizon_s")
        if "seed" in sim_fields:
            sim_fields["master_seed"] = sim_fields.pop("seed")
        try:
            config = sim.SimConfig(**sim_fields)
        except ParameterError as exc:
            raise ConfigError(f"invalid sim settings: {exc}") from exc

    return ExperimentSpec(
        params=base_params, sim=config, sweep=sweep, outputs=outputs, modes=modes,
        grid_points=grid.get("points", 200), t_min=grid.get("t_min"), t_max=grid.get("t_max"),
        sim_workers=workers, name=name)


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    return parse_spec(text, name=path.stem)


# ---------------------------------------------------------------- comparison

@dataclass
class DeviationReport:
    """Pointwise comparison of series ``a`` (reference) against ``b``.

    ``deviation`` is a - b. ``z`` is the deviation in units of the combined
    standard error, or None when neither series carries one.
    """

    times: np.ndarray
    reference: np.ndarray
    deviation: np.ndarray
    stderr: np.ndarray | None
    relative: np.ndarray
    max_relative: float
    mean_relative: float

    @property
    def z(self):
        if self.stderr is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.deviation / self.stderr
        z[(self.stderr == 0) & (self.deviation == 0)] = 0.0
        return z

    def within(self, n_se: float = 0.0, rel_floor: float = 0.0, min_value: float | None = None):
        """Boolean mask of points with |deviation| <= max(n_se*SE, rel_floor*|reference|),
        restricted to points whose reference exceeds ``min_value``.
        """
        tol = rel_floor * np.abs(self.reference)
        if self.stderr is not None:
            tol = np.maximum(tol, n_se * self.stderr)
        ok = np.abs(self.deviation) <= tol
        if min_value is not None:
            ok = ok[self.reference > min_value]
        return ok

    def fraction_within(self, n_se: float = 0.0, rel_floor: float = 0.0, min_value: float | None = None):
        ok = self.within(n_se, rel_floor, min_value)
        return float(ok.mean()) if ok.size else float("nan")

    def to_csv(self) -> str:
        z = self.z
        lines = ["t_s,deviation,se_units,relative"]
        for i, t in enumerate(self.times):
            zi = "" if z is None else format(z[i], ".17g")
            lines.append(f"{t:.17g},{self.deviation[i]:.17g},{zi},{self.relative[i]:.17g}")
        return "\n".join(lines) + "\n"


def compare_series(a: SignalSeries, b: SignalSeries) -> DeviationReport:
    """Deviation of ``b`` from ``a`` on their common time grid."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatch(f"time grids differ ({len(a)} vs {len(b)} points)")
    dev = a.values - b.values
    errs = [s.stderr for s in (a, b) if s.stderr is not None]
    stderr = np.sqrt(sum(e * e for e in errs)) if errs else None
    ref = np.abs(a.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(ref > 0, np.abs(dev) / ref, np.where(dev == 0, 0.0, np.inf))
    mask = ref > 0.01 * ref.max() if ref.size and ref.max() > 0 else np.zeros(ref.shape, bool)
    max_rel = float(rel[mask].max()) if mask.any() else 0.0
    mean_rel = float(rel[mask].mean()) if mask.any() else 0.0
    return DeviationReport(a.times.copy(), a.values.copy(), dev, stderr, rel, max_rel, mean_rel)


def simulation_agrees(report: DeviationReport) -> bool | None:
    """Share of points with mean count > 10 within max(3.5 SE, 5%) is at least 95%.

    None when no point reaches a mean count of 10.
    """
    frac = report.fraction_within(SIM_SE_BAND, SIM_REL_FLOOR, SIM_MIN_COUNT)
    if math.isnan(frac):
        return None
    return bool(frac >= SIM_PASS_FRACTION)


def oracle_agrees(report: DeviationReport) -> bool:
    return report.max_relative <= ORACLE_MAX_REL


# ------------------------------------------------------------------- running

@dataclass
class RunRecord:
    id: int
    mode: str
    point: dict
    params: ChannelParams
    file: str | None = None
    seed: int | None = None
    error: str | None = None
    passed: bool | None = None
    against: str | None = None

    def manifest_line(self, sim_config: sim.SimConfig | None) -> str:
        values = ",".join(f"{k}={getattr(self.params, k)!r}" for k in FIELDS)
        parts = [f"run {self.id}: mode={self.mode}"]
        parts.append(f"file={self.file}" if self.file else "file=-")
        parts.append(f"seed={self.seed}" if self.seed is not None else "seed=-")
        parts.append(f"params={values}")
        if self.against:
            parts.append(f"against={self.against}")
        if sim_config is not None and "simulate" in (self.mode, self.against):
            parts.append(f"sim=dt={sim_config.dt!r},horizon={sim_config.horizon!r},"
                         f"trials={sim_config.trials},record_every={sim_config.record_every}")
        if self.passed is not None:
            parts.append(f"pass={'yes' if self.passed else 'no'}")
        if self.error:
            parts.append(f"error={self.error}")
        return " ".join(parts)


@dataclass
class Manifest:
    path: Path
    records: list

    @property
    def errors(self):
        return [r for r in self.records if r.error]

    @property
    def failed_comparisons(self):
        return [r for r in self.records if r.passed is False]


def _point_label(index, point):
    if not point:
        return f"p{index:03d}"
    tags = "_".join(f"{k}{v:g}" for k, v in point.items())
    return f"p{index:03d}_{tags}"


def _describe(exc):
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _run_point(spec: ExperimentSpec, index: int, point: dict, grid: np.ndarray) -> list[RunRecord]:
    params = spec.params_at(point)
    out = Path(spec.outputs)
    label = _point_label(index, point)
    series: dict[str, SignalSeries | None] = {}
    records = []
    wanted = set(spec.modes)
    if "compare" in wanted:
        wanted.add("analytic")
        if spec.sim is not None:
            wanted.add("simulate")

    seed = None
    config = spec.sim
    if config is not None:
        seed = config.master_seed + index
        config = sim.SimConfig(config.dt, config.horizon, config.trials, seed, config.record_every)

    for mode in ("analytic", "oracle", "simulate"):
        if mode not in wanted:
            continue
        rec = RunRecord(0, mode, point, params, seed=seed if mode == "simulate" else None)
        try:
            if mode == "analytic":
                s = analytic.expected_received(grid, params)
            elif mode == "oracle":
                values = params.N_A * oracle.impulse_response_via_oracle(grid, params)
                s = SignalSeries(grid, values, None, "count", {"source": "oracle"})
            else:
                s = sim.run_ensemble(params, config, record_steps=np.rint(grid / config.dt).astype(np.int64),
                                     workers=spec.sim_workers)
                s = SignalSeries(grid, s.values, s.stderr, "count", s.meta)
            series[mode] = s
            rec.file = f"{label}_{mode}.csv"
            s.write_csv(out / rec.file)
        except ReactiveRxError as exc:
            logger.error("point %s mode %s failed: %s", point, mode, exc)
            series[mode] = None
            rec.error = _describe(exc)
        records.append(rec)

    if "compare" in spec.modes:
        ref = series.get("analytic")
        for other, check in (("simulate", simulation_agrees), ("oracle", oracle_agrees)):
            if other not in series:
                continue
            rec = RunRecord(0, "compare", point, params, seed=seed if other == "simulate" else None,
                            against=other)
            try:
                if ref is None or series[other] is None:
                    raise ReactiveRxError(f"nothing to compare: analytic or {other} series failed")
                report = compare_series(ref, series[other])
                rec.passed = check(report)
                rec.file = f"{label}_compare_{other}.csv"
                (out / rec.file).write_text(report.to_csv(), encoding="utf-8", newline="\n")
            except ReactiveRxError as exc:
                rec.error = _describe(exc)
            records.append(rec)
    return records


def _run_point_args(args):
    return _run_point(*args)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> Manifest:
    """Run every (sweep point, mode) pair and write CSVs plus ``manifest.txt``.

    Module errors are recorded in the manifest against the failing point
    and the run carries on. ``jobs`` > 1 runs sweep points in separate
    processes; each point writes only its own files.
    """
    out = Path(spec.outputs)
    out.mkdir(parents=True, exist_ok=True)
    grid = spec.time_grid()
    points = spec.points()
    tasks = [(spec, i, p, grid) for i, p in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_point_args, tasks))
    else:
        results = [_run_point(*t) for t in tasks]

    records = []
    for recs in results:
        for rec in recs:
            rec.id = len(records)
            records.append(rec)

    lines = [
        f"# reactive-rx {__version__}",
        f"experiment {spec.name}",
        f"modes {','.join(spec.modes)}",
        "sweep " + (" ".join(k + "=" + ",".join(repr(v) for v in vs) for k, vs in spec.sweep.items()) or "-"),
        f"grid points={grid.size} t_min={float(grid[0])!r} t_max={float(grid[-1])!r}",
    ]
    if spec.sim is not None:
        lines.append(f"sim dt={spec.sim.dt!r} horizon={spec.sim.horizon!r} trials={spec.sim.trials} "
                     f"master_seed={spec.sim.master_seed} record_every={spec.sim.record_every} "
                     f"seed_rule=master_seed+point_index")
    lines += [rec.manifest_line(spec.sim) for rec in records]
    path = out / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return Manifest(path, records)


# ----------------------------------------------------------------- presets

FIGURE2_KB = (0.0, 2e3, 4e3, 1e4, 2e4, 4e4)
FIGURE3_KD = (0.0, 2e3, 1e4, 2e4, 4e4)
SCALES = {
    "desk": dict(N_A=1000, trials=200, dt=1e-7, horizon=5e-4),
    "paper": dict(N_A=5000, trials=50_000, dt=5e-8, horizon=5e-4),
}


def figure_spec(figure: int, scale: str = "desk", outputs=None, seed: int = 1,
                modes=("analytic", "simulate", "compare"), sim_workers: int = 1) -> ExperimentSpec:
    """Preset for the k_b sweep (figure 2) or the k_d sweep (figure 3)."""
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    cfg = SCALES[scale]
    base = dict(a=0.5e-6, r0=1e-6, D_A=5e-9, k_f=3.14e-14, k_b=0.0, k_d=0.0, N_A=cfg["N_A"])
    if figure == 2:
        sweep = {"k_b": list(FIGURE2_KB)}
    elif figure == 3:
        base["k_b"] = 2e5
        sweep = {"k_d": list(FIGURE3_KD)}
    else:
        raise ConfigError("figure must be 2 or 3")
    config = None
    if "simulate" in modes or "compare" in modes:
        config = sim.SimConfig(cfg["dt"], cfg["horizon"], cfg["trials"], seed)
    return ExperimentSpec(
        params=validate(**base), sim=config, sweep=sweep,
        outputs=Path(outputs or f"figure{figure}_{scale}"), modes=tuple(modes),
        t_min=cfg["dt"], t_max=cfg["horizon"], sim_workers=sim_workers,
        name=f"figure{figure}_{scale}")


# ------------------------------------------------------------ built-in checks

def conservation_residual(t: float, params: ChannelParams) -> float:
    """|4 pi int_a^inf r^2 p(r, t) dr + P_AC(t) - 1| for a non-degrading channel."""
    width = math.sqrt(4.0 * params.D_A * t)
    upper = params.r0 + 14.0 * width

    def integrand(r):
        return 4.0 * math.pi * r * r * analytic.green_function(r, t, params)

    total = 0.0
    for lo, hi in ((params.a, params.r0), (params.r0, upper)):
        total += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    return abs(total + float(analytic.impulse_response(t, params)) - 1.0)


def builtin_checks():
    """Fast invariant and oracle checks; yields (name, passed, detail)."""
    from . import specfun

    base = validate(a=0.5e-6, r0=1e-6, D_A=5e-9, k_f=3.14e-14, k_b=0.0, k_d=0.0, N_A=1000)
    times = np.geomspace(1e-7, 1e-3, 12)

    ref = 0.4275835761558070044
    got = float(specfun.erfcx_real(1.0))
    yield "erfcx(1)", abs(got - ref) <= 1e-14 * ref, f"{got:.17g}"

    for kb, kd in ((0.0, 0.0), (4e3, 0.0), (2e5, 1e4)):
        p = base.replace(k_b=kb, k_d=kd)
        a_vals = analytic.impulse_response(times, p)
        o_vals = oracle.impulse_response_via_oracle(times, p)
        rel = float(np.max(np.abs(a_vals - o_vals) / np.abs(o_vals)))
        yield f"closed form vs oracle k_b={kb:g} k_d={kd:g}", rel <= 1e-6, f"max rel {rel:.2e}"

    p = base.replace(k_b=2e3)
    s = np.array([1e4 + 3e4j, 2e5 - 1e5j, 5e6 + 1e6j])
    bc = float(np.max(oracle.check_boundary_condition(s, p)))
    pf = float(np.max(oracle.check_partial_fractions(s, p)))
    yield "boundary condition", bc <= 1e-6, f"residual {bc:.2e}"
    yield "partial fractions", pf <= 1e-8, f"residual {pf:.2e}"

    res = max(conservation_residual(t, p) for t in (1e-6, 1e-5, 1e-4))
    yield "probability conservation", res <= 1e-4, f"residual {res:.2e}"

    p_fwd = sim.forward_probability(1e-7, base)
    yield "forward acceptance in (0, 1]", 0 < p_fwd <= 1, f"{p_fwd:.4f}"

    small = base.replace(N_A=200, k_b=4e3)
    cfg = sim.SimConfig(1e-7, 2e-5, trials=2, master_seed=3)
    try:
        first = sim.run_ensemble(small, cfg)
        again = sim.run_ensemble(small, cfg)
        yield "simulation determinism", first == again, f"final mean {first.values[-1]:g}"
    except ReactiveRxError as exc:
        yield "simulation invariants", False, _describe(exc)
