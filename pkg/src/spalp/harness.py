"""Seeded teacher-vs-toy-environment experiments and their CSV outputs."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .teacher import TEACHER_KINDS, TeacherConfig, TraceEntry, make_teacher
from .toyenv import CubeGrid, RewardShape, ToyEnvConfig

log = logging.getLogger(__name__)

RAW_HEADER = ("teacher", "seed", "episode", "mastered_fraction", "alpha", "mean_reward")
SUMMARY_HEADER = ("teacher", "episode", "mean", "stderr", "n_seeds")
TRACE_HEADER = ("teacher", "seed", "episode", "alpha", "mean_reward", "k_selected")
GRID_HEADER = ("teacher", "seed", "cube", "sample_count", "reward", "unlocked")


class ConfigError(ValueError):
    """Bad experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    episodes: int = 40000
    seeds: Tuple[int, ...] = (0, 1, 2)
    eval_every: int = 250
    out_dir: Optional[str] = None
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    env: ToyEnvConfig = ToyEnvConfig()
    teacher: TeacherConfig = TeacherConfig()
    teachers: Tuple[str, ...] = TEACHER_KINDS
    run: RunConfig = RunConfig()
    # label written to the teacher column; defaults to the teacher kind
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if not self.teachers:
            raise ConfigError("teacher.kind", "at least one teacher kind is required")
        for kind in self.teachers:
            if kind not in TEACHER_KINDS:
                raise ConfigError("teacher.kind", f"unknown teacher {kind!r}")
        if not self.run.seeds:
            raise ConfigError("run.seeds", "at least one seed is required")
        if self.run.episodes <= self.teacher.bootstrap_episodes:
            raise ConfigError("run.episodes", "must exceed teacher.bootstrap_episodes")
        if self.run.eval_every < 1:
            raise ConfigError("run.eval_every", "must be positive")
        if self.labels is not None and len(self.labels) != len(self.teachers):
            raise ConfigError("teacher.kind", "one label per teacher kind")

    def label(self, kind: str) -> str:
        if self.labels is None:
            return kind
        return self.labels[self.teachers.index(kind)]


@dataclass(frozen=True)
class MetricRow:
    teacher: str
    seed: int
    episode: int
    mastered_fraction: float
    alpha: Optional[float]
    mean_reward: float


@dataclass(frozen=True)
class SummaryRow:
    teacher: str
    episode: int
    mean: float
    stderr: float
    n_seeds: int


@dataclass
class RunResult:
    rows: List[MetricRow]
    trace: List[TraceEntry]
    grid: List[dict]
    proposals: Optional[List[Tuple[float, ...]]] = None


# ---------------------------------------------------------------- config file

_SECTIONS = {
    "env": (ToyEnvConfig, {"dims": int, "cubes_per_dim": int, "reward_shape": RewardShape, "transfer_learning": "bool",
                           "linear_step": float, "sigmoid_steepness": float, "sigmoid_midpoint": float,
                           "mastery_threshold": float}),
    "teacher": (TeacherConfig, {"fit_rate": int, "p_random": float, "bootstrap_episodes": int, "r_b": float,
                                "history_size": int, "k_min": int, "k_max": int, "em_max_iter": int}),
    "run": (RunConfig, {"episodes": int, "seeds": "ints", "eval_every": int, "out_dir": str, "workers": int}),
}


def _convert(key: str, kind, text: str):
    try:
        if kind == "bool":
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind == "ints":
            return tuple(int(v) for v in text.split(",") if v.strip())
        return kind(text.strip())
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse ``section.key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    return entries


def build_config(entries: Dict[str, str]) -> ExperimentConfig:
    values: Dict[str, dict] = {name: {} for name in _SECTIONS}
    teachers = TEACHER_KINDS
    for key, text in entries.items():
        if key == "teacher.kind":
            teachers = tuple(v.strip() for v in text.split(",") if v.strip())
            continue
        if key == "teacher.seed":
            raise ConfigError(key, "teacher seeds come from run.seeds")
        section, _, name = key.partition(".")
        if section not in _SECTIONS or name not in _SECTIONS[section][1]:
            raise ConfigError(key, "unknown configuration key")
        values[section][name] = _convert(key, _SECTIONS[section][1][name], text)

    built = {}
    for section, (cls, _) in _SECTIONS.items():
        try:
            built[section] = cls(**values[section])
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            # validators name the offending field first
            name = str(exc).split()[0]
            key = f"{section}.{name}" if name in _SECTIONS[section][1] else section
            raise ConfigError(key, str(exc)) from None
    return ExperimentConfig(env=built["env"], teacher=built["teacher"], teachers=teachers, run=built["run"])


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    return build_config(parse_config_text(Path(path).read_text(encoding="utf-8")))


def override(config: ExperimentConfig, key: str, text: str) -> ExperimentConfig:
    """Return ``config`` with one dotted key replaced by ``text``."""
    section, _, name = key.partition(".")
    if key == "teacher.kind":
        return dataclasses.replace(config, teachers=tuple(v.strip() for v in text.split(",")), labels=None)
    if section not in _SECTIONS or name not in _SECTIONS[section][1]:
        raise ConfigError(key, "unknown configuration key")
    value = _convert(key, _SECTIONS[section][1][name], text)
    try:
        sub = dataclasses.replace(getattr(config, section), **{name: value})
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    return dataclasses.replace(config, **{section: sub})


# ---------------------------------------------------------------- running

def run_single(config: ExperimentConfig, kind: str, seed: int, record_proposals: bool = False) -> RunResult:
    """One teacher on one seed: propose, play, observe, for every episode."""
    env = CubeGrid(config.env)
    teacher = make_teacher(kind, [(0.0, 1.0)] * config.env.dims, config.env.raw_range,
                           dataclasses.replace(config.teacher, seed=seed))
    label = config.label(kind)
    rows, proposals = [], [] if record_proposals else None
    every = config.run.eval_every
    for episode in range(1, config.run.episodes + 1):
        task = teacher.propose_task()
        if proposals is not None:
            proposals.append(tuple(task.tolist()))
        teacher.observe(task, env.sample(task))
        if episode % every == 0:
            rows.append(MetricRow(label, seed, episode, env.mastered_fraction(), teacher.state.alpha,
                                  teacher.buffer_mean_reward()))
    log.info("%s seed=%d: mastered %.4f after %d episodes", label, seed, env.mastered_fraction(),
             config.run.episodes)
    return RunResult(rows, list(teacher.trace), env.snapshot(), proposals)


def _run_job(args):
    return run_single(*args)


def run_all(config: ExperimentConfig) -> Dict[Tuple[str, int], RunResult]:
    jobs = [(config, kind, seed) for kind in config.teachers for seed in config.run.seeds]
    if config.run.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.run.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [run_single(*job) for job in jobs]
    return {(kind, seed): res for (_, kind, seed), res in zip(jobs, results)}


def run_experiment(config: ExperimentConfig) -> List[MetricRow]:
    results = run_all(config)
    return [row for res in results.values() for row in res.rows]


def aggregate(rows: Iterable[MetricRow]) -> List[SummaryRow]:
    """Mean and standard error of mastered fraction per (teacher, episode).

    The standard error uses the sample deviation (n - 1) and is 0 for a
    single seed.
    """
    groups: Dict[Tuple[str, int], List[float]] = {}
    for row in rows:
        groups.setdefault((row.teacher, row.episode), []).append(row.mastered_fraction)
    if not groups:
        raise ValueError("nothing to aggregate")
    out = []
    for (teacher, episode), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        n = len(vals)
        se = statistics.stdev(vals) / math.sqrt(n) if n > 1 else 0.0
        out.append(SummaryRow(teacher, episode, statistics.fmean(vals), se, n))
    return out


def final_summary(summary: Sequence[SummaryRow]) -> Dict[str, SummaryRow]:
    last: Dict[str, SummaryRow] = {}
    for row in summary:
        if row.teacher not in last or row.episode > last[row.teacher].episode:
            last[row.teacher] = row
    return last


# ---------------------------------------------------------------- csv

def _fmt(value) -> str:
    if value is None:
        return "off"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit_csv(rows: Sequence[Union[MetricRow, SummaryRow]], path, summary: Optional[bool] = None):
    """Write metric rows (raw) or summary rows as CSV.

    The kind is inferred from the first row; pass ``summary`` explicitly to
    choose the header of an empty file.
    """
    if summary is None:
        summary = bool(rows) and isinstance(rows[0], SummaryRow)
    header = SUMMARY_HEADER if summary else RAW_HEADER
    _write(path, _csv_text(header, (dataclasses.astuple(r) for r in rows)))


def emit_trace(traces: Dict[Tuple[str, int], List[TraceEntry]], path):
    lines = ((label, seed, t.episode, t.alpha, t.mean_reward, t.k_selected)
             for (label, seed), trace in traces.items() for t in trace)
    _write(path, _csv_text(TRACE_HEADER, lines))


def emit_grid(grids: Dict[Tuple[str, int], List[dict]], path):
    lines = ((label, seed, g["cube"], g["sample_count"], float(g["reward"]), g["unlocked"])
             for (label, seed), grid in grids.items() for g in grid)
    _write(path, _csv_text(GRID_HEADER, lines))


def read_metrics(path) -> List[MetricRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RAW_HEADER:
            raise ValueError(f"{path}: not a metrics file")
        return [
            MetricRow(r["teacher"], int(r["seed"]), int(r["episode"]), float(r["mastered_fraction"]),
                      None if r["alpha"] == "off" else float(r["alpha"]), float(r["mean_reward"]))
            for r in reader
        ]


def write_outputs(config: ExperimentConfig, results: Dict[Tuple[str, int], RunResult], out_dir) -> List[MetricRow]:
    out = Path(out_dir)
    rows = [row for res in results.values() for row in res.rows]
    emit_csv(rows, out / "metrics.csv", summary=False)
    emit_csv(aggregate(rows), out / "summary.csv", summary=True)
    emit_trace({(config.label(k), s): r.trace for (k, s), r in results.items()}, out / "trace.csv")
    emit_grid({(config.label(k), s): r.grid for (k, s), r in results.items()}, out / "grid.csv")
    return rows


@dataclass(frozen=True)
class SweepPoint:
    value: str
    teacher: str
    final_mean: float
    final_stderr: float
    best_mean: float
    best_episode: int


SWEEP_HEADER = ("param", "value", "teacher", "final_mean", "final_stderr", "best_mean", "best_episode")


def sweep(config: ExperimentConfig, param: str, values: Sequence[str], out_dir=None) -> List[SweepPoint]:
    """Run one sub-experiment per value of ``param``.

    Each point reports both the final mastery and the best mastery reached
    at any evaluation, since either may be used to pick the winning value.
    """
    points = []
    for value in values:
        sub = override(config, param, value)
        sub = dataclasses.replace(sub, labels=tuple(f"{k}[{param}={value}]" for k in sub.teachers))
        results = run_all(sub)
        if out_dir is not None:
            rows = write_outputs(sub, results, Path(out_dir) / f"{param}={value}")
        else:
            rows = [row for res in results.values() for row in res.rows]
        summary = aggregate(rows)
        finals = final_summary(summary)
        for label, last in finals.items():
            best = max((s for s in summary if s.teacher == label), key=lambda s: (s.mean, -s.episode))
            points.append(SweepPoint(value, label, last.mean, last.stderr, best.mean, best.episode))
    if out_dir is not None:
        lines = ((param, p.value, p.teacher, p.final_mean, p.final_stderr, p.best_mean, p.best_episode)
                 for p in points)
        _write(Path(out_dir) / "sweep.csv", _csv_text(SWEEP_HEADER, lines))
    return points
