"""Monte Carlo sweeps over (learner, d, n, epsilon, delta) grids.

Each trial derives its own seed from the master seed and its grid key, so any
cell can be rerun in isolation and the output does not depend on how trials
are scheduled across workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from trapdoor.distributions import MAX_BRUTEFORCE_DIM, TrapdoorParams, sample, tv_decomposed
from trapdoor.errors import ConfigError, ContractError, OutputError
from trapdoor.learners import LEARNER_IDS, PrivacyBudget, make_learner

CSV_HEADER = (
    "learner",
    "d",
    "n",
    "epsilon",
    "delta",
    "trial",
    "tv_error",
    "l1_error",
    "key_count",
    "fallback_used",
    "seed",
)

TRUTH_MODES = ("fixed", "random")


@dataclass(frozen=True)
class SweepConfig:
    learners: tuple[str, ...]
    dims: tuple[int, ...]
    sample_sizes: tuple[int, ...]
    budgets: tuple[tuple[float, float], ...]
    w: float
    trials: int
    master_seed: int
    truth_mode: str = "random"
    truth_p: tuple[float, ...] = ()
    truth_range: tuple[float, float] = (1.0 / 3.0, 2.0 / 3.0)
    output_path: str | None = None
    workers: int = 1
    alpha: float | None = None

    def __post_init__(self) -> None:
        for name in ("learners", "dims", "sample_sizes", "budgets"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigError(f"{name} must be non-empty")
            object.__setattr__(self, name, value)
        for learner in self.learners:
            if learner not in LEARNER_IDS:
                raise ConfigError(
                    f"unknown learner {learner!r}; expected one of {', '.join(LEARNER_IDS)}"
                )
        if any(int(d) != d or d < 2 for d in self.dims):
            raise ConfigError("all dims must be integers >= 2")
        if any(int(n) != n or n < 1 for n in self.sample_sizes):
            raise ConfigError("sample sizes must be positive integers")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 < self.w < 1.0:
            raise ConfigError(f"class weight w must lie in (0, 1), got {self.w}")
        try:
            for eps, delta in self.budgets:
                PrivacyBudget(eps, delta)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid budget: {exc}") from None
        if self.truth_mode not in TRUTH_MODES:
            raise ConfigError(f"truth_mode must be one of {TRUTH_MODES}, got {self.truth_mode!r}")
        if self.truth_mode == "fixed":
            object.__setattr__(self, "truth_p", tuple(float(v) for v in self.truth_p))
            if len(self.truth_p) != 1 and any(len(self.truth_p) != d for d in self.dims):
                raise ConfigError("fixed truth_p must have one entry or one entry per coordinate")
            if any(not 0.0 <= v <= 1.0 for v in self.truth_p):
                raise ConfigError("fixed truth_p entries must lie in [0, 1]")
        lo, hi = self.truth_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError(f"truth_range must satisfy 0 <= lo <= hi <= 1, got {self.truth_range}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True, order=True)
class ExperimentRow:
    learner: str
    d: int
    n: int
    epsilon: float
    delta: float
    trial: int
    tv_error: float = field(compare=False)
    l1_error: float = field(compare=False)
    key_count: int = field(compare=False)
    fallback_used: bool = field(compare=False)
    seed: int = field(compare=False)

    @property
    def key(self) -> tuple:
        return (self.learner, self.d, self.n, self.epsilon, self.delta, self.trial)


def trial_seed(
    master_seed: int, learner: str, d: int, n: int, epsilon: float, delta: float, trial: int
) -> int:
    """A 63-bit seed that depends only on the master seed and the trial's grid key."""
    text = f"{master_seed}|{learner}|{d}|{n}|{epsilon!r}|{delta!r}|{trial}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


# --------------------------------------------------------------------------
# Error metrics
# --------------------------------------------------------------------------


def l1_error(estimate: TrapdoorParams, truth: TrapdoorParams) -> float:
    """``||p_hat - p||_1``; if the dimensions differ the shorter vector is padded with 1/2."""
    a, b = estimate.p_array, truth.p_array
    if a.size != b.size:
        size = max(a.size, b.size)
        a = np.pad(a, (0, size - a.size), constant_values=0.5)
        b = np.pad(b, (0, size - b.size), constant_values=0.5)
    return math.fsum(np.abs(a - b))


def tv_surrogate(estimate: TrapdoorParams, truth: TrapdoorParams) -> float:
    """Upper bound on the TV distance for a shared ``(w, d)``, usable at any ``d``.

    The key-component TV term is replaced by its cap of 1 whenever the vectors differ.
    """
    if estimate.d != truth.d or estimate.w != truth.w:
        raise ContractError("surrogate needs a shared (w, d)")
    differs = estimate.p != truth.p
    hard = (1.0 - truth.w) / truth.d * l1_error(estimate, truth)
    return min(1.0, truth.w * differs + hard)


def _tv_across_dims(estimate: TrapdoorParams, truth: TrapdoorParams) -> float:
    # Key supports of different bit lengths are disjoint: the key mass w of each
    # side counts in full. Only the hard atoms overlap.
    def hard_masses(t: TrapdoorParams, size: int) -> np.ndarray:
        out = np.zeros(2 * size)
        scale = (1.0 - t.w) / t.d
        out[0 : 2 * t.d : 2] = scale * t.p_array
        out[1 : 2 * t.d : 2] = scale * (1.0 - t.p_array)
        return out

    size = max(estimate.d, truth.d)
    hard_gap = math.fsum(np.abs(hard_masses(estimate, size) - hard_masses(truth, size)))
    return min(1.0, 0.5 * (estimate.w + truth.w + hard_gap))


def tv_error(estimate: TrapdoorParams, truth: TrapdoorParams) -> float:
    """TV error of an estimate as recorded by the harness.

    Exact for ``d <= 20``; above that the documented surrogate upper bound.
    Estimates whose inferred dimension differs from the truth are scored
    exactly, since their key components cannot overlap.
    """
    if estimate.d != truth.d:
        return _tv_across_dims(estimate, truth)
    if truth.d <= MAX_BRUTEFORCE_DIM:
        return tv_decomposed(estimate, truth)
    return tv_surrogate(estimate, truth)


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Task:
    learner: str
    d: int
    n: int
    epsilon: float
    delta: float
    trial: int


def _truth(config: SweepConfig, d: int, rng: np.random.Generator) -> TrapdoorParams:
    if config.truth_mode == "fixed":
        p = config.truth_p * d if len(config.truth_p) == 1 else config.truth_p
    else:
        lo, hi = config.truth_range
        p = rng.uniform(lo, hi, size=d)
    return TrapdoorParams.of(config.w, p)


def run_trial(config: SweepConfig, task: _Task) -> ExperimentRow:
    seed = trial_seed(
        config.master_seed, task.learner, task.d, task.n, task.epsilon, task.delta, task.trial
    )
    truth_ss, data_ss, mech_ss = np.random.SeedSequence(seed).spawn(3)
    truth = _truth(config, task.d, np.random.default_rng(truth_ss))
    data = sample(truth, task.n, data_ss)
    budget = PrivacyBudget(task.epsilon, task.delta)
    report = make_learner(task.learner, config.w, budget, mech_ss)(data)
    return ExperimentRow(
        learner=task.learner,
        d=task.d,
        n=task.n,
        epsilon=task.epsilon,
        delta=task.delta,
        trial=task.trial,
        tv_error=tv_error(report.estimate, truth),
        l1_error=l1_error(report.estimate, truth),
        key_count=report.key_count,
        fallback_used=report.fallback_used,
        seed=seed,
    )


def _run_chunk(args: tuple[SweepConfig, list[_Task]]) -> list[ExperimentRow]:
    config, tasks = args
    return [run_trial(config, t) for t in tasks]


def grid_tasks(config: SweepConfig) -> list[_Task]:
    return [
        _Task(learner, int(d), int(n), float(eps), float(delta), trial)
        for learner in config.learners
        for d in config.dims
        for n in config.sample_sizes
        for eps, delta in config.budgets
        for trial in range(config.trials)
    ]


def run_sweep(config: SweepConfig, workers: int | None = None) -> list[ExperimentRow]:
    """Run every trial of the grid and return rows sorted by grid key.

    ``workers`` overrides ``config.workers``. When ``config.output_path`` is
    set the rows are also written there as CSV.
    """
    workers = config.workers if workers is None else workers
    tasks = grid_tasks(config)
    if workers <= 1:
        rows = [run_trial(config, t) for t in tasks]
    else:
        chunk = max(1, math.ceil(len(tasks) / (4 * workers)))
        chunks = [(config, tasks[i : i + chunk]) for i in range(0, len(tasks), chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_run_chunk, chunks) for row in part]
    rows.sort()
    if config.output_path is not None:
        write_csv(rows, config.output_path)
    return rows


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def format_csv(rows: Iterable[ExperimentRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(
            [
                r.learner,
                r.d,
                r.n,
                _fmt_float(r.epsilon),
                _fmt_float(r.delta),
                r.trial,
                _fmt_float(r.tv_error),
                _fmt_float(r.l1_error),
                r.key_count,
                "true" if r.fallback_used else "false",
                r.seed,
            ]
        )
    return buf.getvalue()


def write_csv(rows: Iterable[ExperimentRow], path: str | Path) -> None:
    try:
        Path(path).write_text(format_csv(rows), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def parse_csv(text: str) -> list[ExperimentRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ContractError(f"unexpected CSV header {header!r}")
    return [
        ExperimentRow(
            learner=rec[0],
            d=int(rec[1]),
            n=int(rec[2]),
            epsilon=float(rec[3]),
            delta=float(rec[4]),
            trial=int(rec[5]),
            tv_error=float(rec[6]),
            l1_error=float(rec[7]),
            key_count=int(rec[8]),
            fallback_used=rec[9] == "true",
            seed=int(rec[10]),
        )
        for rec in reader
    ]


# --------------------------------------------------------------------------
# Summaries
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    learner: str
    d: int
    n: int
    epsilon: float
    delta: float
    count: int
    mean_tv: float
    median_tv: float
    mean_l1: float
    median_l1: float
    failure_rate: float


def summarize(rows: Sequence[ExperimentRow], alpha: float) -> list[SummaryRow]:
    """Aggregate trials per (learner, d, n, epsilon, delta).

    ``failure_rate`` is the fraction of trials with ``tv_error > alpha``.
    """
    if not rows:
        raise ContractError("cannot summarize an empty set of rows")
    groups: dict[tuple, list[ExperimentRow]] = {}
    for r in rows:
        groups.setdefault(r.key[:5], []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        tv = [r.tv_error for r in g]
        l1 = [r.l1_error for r in g]
        out.append(
            SummaryRow(
                *key,
                count=len(g),
                mean_tv=math.fsum(tv) / len(tv),
                median_tv=statistics.median(tv),
                mean_l1=math.fsum(l1) / len(l1),
                median_l1=statistics.median(l1),
                failure_rate=sum(t > alpha for t in tv) / len(tv),
            )
        )
    return out


def format_summary(summary: Sequence[SummaryRow]) -> str:
    header = f"{'learner':<11} {'d':>5} {'n':>7} {'eps':>6} {'delta':>8} {'trials':>6} " \
             f"{'mean_tv':>9} {'med_tv':>9} {'mean_l1':>9} {'med_l1':>9} {'fail':>6}"
    lines = [header]
    for s in summary:
        lines.append(
            f"{s.learner:<11} {s.d:>5} {s.n:>7} {s.epsilon:>6.3g} {s.delta:>8.2g} {s.count:>6} "
            f"{s.mean_tv:>9.4g} {s.median_tv:>9.4g} {s.mean_l1:>9.4g} {s.median_l1:>9.4g} "
            f"{s.failure_rate:>6.3f}"
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip())


def _budgets(value: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in value.split(","):
        if not item.strip():
            continue
        eps, sep, delta = item.partition(":")
        if not sep:
            raise ValueError(f"budget {item.strip()!r} must be written epsilon:delta")
        out.append((float(eps), float(delta)))
    return tuple(out)


_CONFIG_KEYS = {
    "learners": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "dims": _ints,
    "sample_sizes": _ints,
    "budgets": _budgets,
    "w": float,
    "trials": int,
    "master_seed": int,
    "truth_mode": str.strip,
    "truth_p": _floats,
    "truth_range": _floats,
    "output_path": str.strip,
    "workers": int,
    "alpha": float,
}


def parse_config(text: str, path: str | None = None) -> SweepConfig:
    """Parse a ``key=value`` sweep configuration; lists are comma-separated.

    ``budgets`` is a list of ``epsilon:delta`` pairs. Blank lines and ``#``
    comments are ignored.
    """
    where = f"{path}:" if path else ""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{where}line {lineno}: expected key=value, got {raw.strip()!r}")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{where}line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{where}line {lineno}: bad value for {key}: {exc}") from None
    missing = {"learners", "dims", "sample_sizes", "budgets", "w", "trials", "master_seed"}
    missing -= values.keys()
    if missing:
        raise ConfigError(f"{where} missing required keys: {', '.join(sorted(missing))}")
    if "truth_range" in values and len(values["truth_range"]) != 2:
        raise ConfigError(f"{where} truth_range needs two values lo,hi")
    return SweepConfig(**values)


def read_config(path: str | Path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), path=str(path))
