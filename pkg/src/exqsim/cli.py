"""Command-line experiment runner.

Usage::

    exqsim <kind> [--config PATH] [--seed N] [--n-traj N] [--backend dense|split] [--out DIR]

Every run writes ``<kind>.csv`` (data series), ``<kind>_summary.json`` and
``manifest.json`` into the output directory.  CSV and summary files start
from the SHA-256 of the resolved configuration and the seed, so identical
inputs give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .algorithms import compile_logical_circuit, dj_algorithmic_fidelity, sandwich_schedules, sandwiched_cnot_comparison
from .exchange import schedule_unitary
from .gates import CNOT, max_deviation
from .hilbert import LogicalCodec, RngStream
from .library import canonical_library
from .mcwf import (
    FidelityEstimate,
    NoiseModel,
    Segment,
    StepSizeError,
    TrajectoryConfig,
    ensemble_fidelity,
    idle_program,
    sample_initial_states,
)
from .synth import CnotCostModel, cnot_cost, makhlin_class, multi_start_synthesize, table_local_times


KINDS = (
    "gate-verify",
    "synth",
    "cnot-fidelity",
    "free-evolution",
    "emission-fidelity",
    "dj",
    "sandwich",
    "bare-cnot-compare",
)
PRESETS = {"figure": 25600, "smoke": 512}
FIDELITY_COLUMNS = ["series", "gamma_dep", "gamma_emi", "F", "stderr", "n_traj", "n_states", "t_f"]


class ConfigError(ValueError):
    pass


def default_grid(per_decade: int = 8, lo: float = 1e-5, hi: float = 1e-2) -> list[float]:
    """Log-spaced rates, ``per_decade`` points per decade, both ends included."""
    n = int(round(np.log10(hi / lo) * per_decade)) + 1
    return [float(f"{g:.6g}") for g in np.logspace(np.log10(lo), np.log10(hi), n)]


@dataclass
class ExperimentConfig:
    kind: str
    grid: list = field(default_factory=list)
    n_traj: int = PRESETS["smoke"]
    steps_per_gate: int = 20
    seed: int = 0
    backend: str = "split"
    n_states: int = 16
    out_dir: str = "results"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if not self.grid:
            rates = default_grid()
            if self.kind == "emission-fidelity":
                self.grid = [[0.0, g] for g in rates]
            else:
                self.grid = [[g, 0.0] for g in rates]
        grid = []
        for pt in self.grid:
            if isinstance(pt, dict):
                pt = [pt.get("gamma_dep", 0.0), pt.get("gamma_emi", 0.0)]
            elif isinstance(pt, (int, float)):
                pt = [pt, 0.0]
            if len(pt) != 2:
                raise ConfigError(f"grid point {pt!r} must be [gamma_dep, gamma_emi]")
            try:
                dep, emi = float(pt[0]), float(pt[1])
            except (TypeError, ValueError):
                raise ConfigError(f"grid point {pt!r} is not numeric")
            if not (np.isfinite(dep) and np.isfinite(emi)) or dep < 0 or emi < 0:
                raise ConfigError(f"grid values must be > 0 or exactly 0, got {pt!r}")
            grid.append([dep, emi])
        self.grid = grid
        if isinstance(self.n_traj, str):
            if self.n_traj not in PRESETS:
                raise ConfigError(f"unknown preset {self.n_traj!r}; have {sorted(PRESETS)}")
            self.n_traj = PRESETS[self.n_traj]
        for name in ("n_traj", "steps_per_gate", "n_states"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
            setattr(self, name, int(getattr(self, name)))
        if self.backend not in ("dense", "split"):
            raise ConfigError("backend must be 'dense' or 'split'")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def sha256(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def trajectory_config(self) -> TrajectoryConfig:
        return TrajectoryConfig(
            steps_per_gate=self.steps_per_gate,
            n_traj=self.n_traj,
            seed=self.seed,
            backend=self.backend,
        )

    def noise_grid(self) -> list[NoiseModel]:
        return [NoiseModel(dep, emi) for dep, emi in self.grid]


def bare_cnot_baseline(noise: NoiseModel, cfg: TrajectoryConfig, n_states: int = 16) -> FidelityEstimate:
    """Unencoded two-spin CNOT as one coherent block lasting the core's total time.

    The block is ``H = pi/(4T) (1 - Z) (1 - X)`` for time ``T``, which equals
    CNOT exactly, sampled with ``19 * steps_per_gate`` steps.
    """
    core = canonical_library()["CORE19"]
    T = core.total_time
    I2 = np.eye(2)
    Z = np.diag([1.0, -1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    H = np.pi / (4 * T) * np.kron(I2 - Z, I2 - X)
    seg = Segment(T, hamiltonian=H.astype(complex), n_steps=len(core) * cfg.steps_per_gate, label="bare-cnot")
    gen = RngStream(cfg.seed, 0, purpose=1).generator()
    from .hilbert import sample_logical_bloch_state

    initials = sample_logical_bloch_state(2, gen, size=n_states)
    est = ensemble_fidelity(initials, [seg], noise, cfg, label="bare-cnot")
    est.metadata["t_f"] = T
    return est


def _fid_row(series: str, noise: NoiseModel, est: FidelityEstimate, t_f: float) -> list:
    return [
        series,
        f"{noise.gamma_dep:.6g}",
        f"{noise.gamma_emi:.6g}",
        f"{est.mean:.10f}",
        f"{est.stderr:.10f}",
        est.n_traj,
        est.n_initial_states,
        f"{t_f:.6f}",
    ]


def _run_gate_verify(config: ExperimentConfig):
    lib = canonical_library()
    codec = LogicalCodec(2)
    rows = []
    summary = {}
    for name in ("CNOT30", "SANDWICH31"):
        s = lib[name]
        target = CNOT if name == "CNOT30" else _sandwich_target()
        dev = max_deviation(codec.logical_block(schedule_unitary(s)), target)
        rows.append([name, len(s), f"{s.total_time:.6f}", f"{dev:.6e}", ""])
        summary[name] = {"n_pulses": len(s), "total_time": s.total_time, "max_deviation": dev}
    comp = compile_logical_circuit([("CNOT", 0, 1)], 2).schedule
    dev = max_deviation(codec.logical_block(schedule_unitary(comp)), CNOT)
    rows.insert(1, ["CNOT30-compiled", len(comp), f"{comp.total_time:.6f}", f"{dev:.6e}", ""])
    summary["CNOT30-compiled"] = {"n_pulses": len(comp), "total_time": comp.total_time, "max_deviation": dev}
    ev = cnot_cost(table_local_times())
    s35 = lib["CNOT35"]
    rows.append(["CNOT35", len(s35), f"{s35.total_time:.6f}", f"{ev.distance:.6e}", f"{ev.leakage:.6e}"])
    summary["CNOT35"] = {"n_pulses": len(s35), "total_time": s35.total_time, "cost": ev.total,
                         "distance": ev.distance, "leakage": ev.leakage}
    core = CnotCostModel().core_block
    summary["CORE19"] = {"makhlin_matches_cnot_1e-4": makhlin_class(core).matches(makhlin_class(CNOT), 1e-4)}
    header = ["schedule", "n_pulses", "total_time", "max_deviation_or_distance", "leakage"]
    return header, rows, summary, {}


def _sandwich_target():
    from .gates import HADAMARD

    HH = np.kron(HADAMARD, HADAMARD)
    return HH @ CNOT @ HH


def _run_synth(config: ExperimentConfig):
    n_shots = int(config.options.get("n_shots", 200))
    res = multi_start_synthesize(
        n_shots,
        RngStream(config.seed, purpose=2),
        max_iter=int(config.options.get("max_iter", 20000)),
        restarts=int(config.options.get("restarts", 20)),
    )
    rows = [[k, f"{c:.10e}"] for k, c in res.trace]
    summary = {
        "n_shots": n_shots,
        "start_cost": res.start_cost,
        "cost": res.cost.total,
        "distance": res.cost.distance,
        "leakage": res.cost.leakage,
        "times": [float(t) for t in res.times],
        "total_time": res.schedule.total_time,
    }
    extra = {"synth_schedule.json": json.dumps(res.schedule.to_dict(), indent=2)}
    return ["restart", "cost"], rows, summary, extra


def _fidelity_sweep(config: ExperimentConfig, series):
    cfg = config.trajectory_config()
    rows, points = [], []
    for noise in config.noise_grid():
        point = {"gamma_dep": noise.gamma_dep, "gamma_emi": noise.gamma_emi}
        for name, fn in series:
            est, t_f = fn(noise, cfg)
            rows.append(_fid_row(name, noise, est, t_f))
            point[name] = {"F": est.mean, "stderr": est.stderr}
        points.append(point)
    return FIDELITY_COLUMNS, rows, {"points": points}, {}


def _encoded_series(config: ExperimentConfig, schedule_name: str = "CNOT30", idle: bool = False):
    sched = canonical_library()[schedule_name]
    initials = sample_initial_states(LogicalCodec(2), config.n_states, config.seed)
    program = idle_program(sched) if idle else sched

    def fn(noise, cfg):
        return ensemble_fidelity(initials, program, noise, cfg, label=schedule_name), sched.total_time

    return fn


def _run_cnot_fidelity(config):
    return _fidelity_sweep(
        config,
        [("cnot30", _encoded_series(config)), ("free-evolution", _encoded_series(config, idle=True))],
    )


def _run_free_evolution(config):
    return _fidelity_sweep(config, [("free-evolution", _encoded_series(config, idle=True))])


def _run_emission(config):
    return _fidelity_sweep(config, [("cnot30", _encoded_series(config))])


def _run_bare_compare(config):
    core_T = canonical_library()["CORE19"].total_time

    def bare(noise, cfg):
        return bare_cnot_baseline(noise, cfg, config.n_states), core_T

    return _fidelity_sweep(config, [("cnot30", _encoded_series(config)), ("bare-cnot", bare)])


def _run_dj(config):
    cfg = config.trajectory_config()
    random_inputs = bool(config.options.get("random_inputs", False))
    rows, curve = [], []
    header = ["oracle", "gamma_dep", "gamma_emi", "F", "stderr", "n_traj", "t_f"]
    for noise in config.noise_grid():
        res = dj_algorithmic_fidelity(noise, cfg, random_inputs=random_inputs, n_states=config.n_states)
        for est, t_f in zip(res.estimates, res.total_times):
            rows.append([est.metadata["oracle"], f"{noise.gamma_dep:.6g}", f"{noise.gamma_emi:.6g}",
                         f"{est.mean:.10f}", f"{est.stderr:.10f}", est.n_traj, f"{t_f:.6f}"])
        w = res.worst
        rows.append(["worst", f"{noise.gamma_dep:.6g}", f"{noise.gamma_emi:.6g}",
                     f"{w.mean:.10f}", f"{w.stderr:.10f}", w.n_traj, f"{w.metadata['t_f']:.6f}"])
        curve.append({"gamma_dep": noise.gamma_dep, "gamma_emi": noise.gamma_emi,
                      "worst_case_F": w.mean, "stderr": w.stderr, "worst_oracle": w.metadata["oracle"],
                      "average_F": res.average})
    return header, rows, {"worst_case_curve": curve}, {}


def _run_sandwich(config):
    cfg = config.trajectory_config()
    serial, merged = sandwich_schedules()
    rows, points = [], []
    for p in sandwiched_cnot_comparison(config.noise_grid(), cfg, max(64, config.n_states)):
        rows.append(_fid_row("serial42", p.noise, p.serial, serial.total_time))
        rows.append(_fid_row("merged31", p.noise, p.merged, merged.total_time))
        points.append({"gamma_dep": p.noise.gamma_dep, "gamma_emi": p.noise.gamma_emi,
                       "serial": p.serial.mean, "merged": p.merged.mean,
                       "gain": p.gain, "gain_stderr": p.gain_stderr})
    return FIDELITY_COLUMNS, rows, {"points": points}, {}


RUNNERS = {
    "gate-verify": _run_gate_verify,
    "synth": _run_synth,
    "cnot-fidelity": _run_cnot_fidelity,
    "free-evolution": _run_free_evolution,
    "emission-fidelity": _run_emission,
    "dj": _run_dj,
    "sandwich": _run_sandwich,
    "bare-cnot-compare": _run_bare_compare,
}


def _csv_text(config: ExperimentConfig, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={config.sha256()}, seed={config.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_experiment(config: ExperimentConfig) -> dict[str, Path]:
    """Run one experiment and write its CSV, JSON summary and manifest."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    header, rows, summary, extra = RUNNERS[config.kind](config)
    wall = time.perf_counter() - start
    digest = config.sha256()
    paths = {}
    paths["csv"] = out / f"{config.kind}.csv"
    paths["csv"].write_text(_csv_text(config, header, rows))
    summary = {"kind": config.kind, "config_sha256": digest, "seed": config.seed, **summary}
    paths["summary"] = out / f"{config.kind}_summary.json"
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for name, text in extra.items():
        paths[name] = out / name
        paths[name].write_text(text + "\n")
    manifest = {
        "kind": config.kind,
        "config_sha256": digest,
        "seed": config.seed,
        "config": config.to_dict(),
        "outputs": sorted(p.name for p in paths.values()),
        "wall_time_s": round(wall, 3),
        "versions": {
            "exqsim": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    paths["manifest"] = out / "manifest.json"
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exqsim", description="Exchange-only encoded quantum computing experiments")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", type=Path, help="JSON experiment configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-traj", help="trajectory count or preset name (figure, smoke)")
    p.add_argument("--backend", choices=("dense", "split"))
    p.add_argument("--out", type=Path, help="output directory")
    return p


def load_config(args) -> ExperimentConfig:
    d: dict = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    if d.get("kind", args.kind) != args.kind:
        raise ConfigError(f"config kind {d['kind']!r} does not match command {args.kind!r}")
    d["kind"] = args.kind
    if args.seed is not None:
        d["seed"] = args.seed
    if args.n_traj is not None:
        d["n_traj"] = args.n_traj if args.n_traj in PRESETS else _int(args.n_traj, "--n-traj")
    if args.backend is not None:
        d["backend"] = args.backend
    if args.out is not None:
        d["out_dir"] = str(args.out)
    return ExperimentConfig.from_dict(d)


def _int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{name} expects an integer or preset name, got {text!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        paths = run_experiment(config)
    except ConfigError as exc:
        print(f"exqsim: invalid config: {exc}", file=sys.stderr)
        return 2
    except StepSizeError as exc:
        print(f"exqsim: step size too large: {exc}", file=sys.stderr)
        return 3
    for key in ("csv", "summary", "manifest"):
        print(paths[key])
    return 0


if __name__ == "__main__":
    sys.exit(main())
