"""Run configured scenarios, summarize residual misalignment and write outputs."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import wrap_angle
from .channel import eval_trajectory, run_transmission
from .config import ScenarioConfig

KICKS_HEADER = ("kick_index", "time_s", "window_events", "r0_star", "r1_star", "eps_hat_rad",
                "applied_correction_rad", "abstained", "true_eps_rad", "residual_rad")
EVENTS_HEADER = ("pulse_index", "time_s", "alice_bit", "bob_basis", "outcome",
                 "true_eps_rad", "residual_rad")


@dataclass
class ReplicaResult:
    replica: int
    seed: int
    n_pulses: int
    n_detected: int
    kicks: list
    events: object = None


@dataclass
class RunSummary:
    """Residual misalignment statistics, pooled over replicas.

    ``replicas`` holds one dict per replica with the same statistics.
    """

    residual_mean: float
    residual_std: float
    kick_count: int
    abstain_count: int
    excluded_count: int
    replicas: list = field(default_factory=list)

    def to_dict(self):
        return {
            "residual_mean_rad": self.residual_mean,
            "residual_std_rad": self.residual_std,
            "kick_count": self.kick_count,
            "abstain_count": self.abstain_count,
            "excluded_count": self.excluded_count,
            "replicas": self.replicas,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["residual_mean_rad"], d["residual_std_rad"], d["kick_count"],
                   d["abstain_count"], d["excluded_count"], d["replicas"])


def kick_residuals(kicks, trajectory, when="after"):
    """True misalignment and residual at each kick.

    With ``when="after"`` (default) the residual is the true angle minus the
    correction the kick has just applied, i.e. the misalignment left on the
    channel once feedback acted.  ``when="before"`` uses the correction in
    force while the window was being collected.
    """
    if when not in ("after", "before"):
        raise ValueError(f"when must be 'after' or 'before', got {when!r}")
    times = np.array([k.time_s for k in kicks], dtype=float)
    attr = "applied_correction" if when == "after" else "correction_before"
    correction = np.array([getattr(k, attr) for k in kicks], dtype=float)
    true_eps = eval_trajectory(trajectory, times) if len(kicks) else np.empty(0)
    return true_eps, wrap_angle(true_eps - correction)


def excluded_kicks(kicks, trajectory):
    """Indices of kicks whose window straddles a jump of the trajectory.

    For every discontinuity the first kick at or after it is excluded.
    """
    times = np.array([k.time_s for k in kicks], dtype=float)
    out = set()
    for t in trajectory.discontinuities:
        i = int(np.searchsorted(times, t, side="left"))
        if i < len(times):
            out.add(i)
    return sorted(out)


def _stats(residuals):
    n = len(residuals)
    mean = float(np.mean(residuals)) if n else math.nan
    std = float(np.std(residuals, ddof=1)) if n > 1 else 0.0 if n == 1 else math.nan
    return mean, std


def residual_stats(kicks, trajectory, exclude_jumps=True, when="after"):
    """Mean and sample std of kick residuals for one replica.

    Raises
    ------
    ValueError
        If the kick log is empty.
    """
    if not kicks:
        raise ValueError("cannot summarize an empty kick log")
    _, residual = kick_residuals(kicks, trajectory, when)
    excluded = excluded_kicks(kicks, trajectory) if exclude_jumps else []
    keep = np.ones(len(kicks), bool)
    keep[excluded] = False
    mean, std = _stats(residual[keep])
    return RunSummary(mean, std, len(kicks), sum(k.abstained for k in kicks), len(excluded))


def step_recovery(kicks, trajectory):
    """How well the loop follows each jump of a step trajectory.

    For every discontinuity, compares the jump amplitude with the
    correction in force after the first kick whose window lies entirely
    after the jump, measured from the true pre-jump angle.

    Returns
    -------
    list of dict
        Keys ``time``, ``amplitude``, ``recovered`` and ``error`` (radians).
    """
    times = np.array([k.time_s for k in kicks], dtype=float)
    out = []
    for t in trajectory.discontinuities:
        i = int(np.searchsorted(times, t, side="left"))
        if i + 1 >= len(kicks):
            continue
        before = eval_trajectory(trajectory, max(t - 1e-9, 0.0))
        amplitude = wrap_angle(eval_trajectory(trajectory, t) - before)
        recovered = wrap_angle(kicks[i + 1].applied_correction - before)
        out.append({"time": t, "amplitude": amplitude, "recovered": recovered,
                    "error": abs(wrap_angle(recovered - amplitude))})
    return out


def run_replica(config: ScenarioConfig, replica: int, keep_events=None):
    seed = (config.seed + replica) % 2 ** 64
    controller = config.feedback.make_controller()
    if keep_events is None:
        keep_events = config.events_csv
    res = run_transmission(config.params, config.trajectory, controller, config.duration,
                           seed, keep_events=keep_events)
    events = res.events[::config.events_decimate] if keep_events else None
    return ReplicaResult(replica, seed, res.n_pulses, res.n_detected, res.kicks, events)


def _run_one(args):
    return run_replica(*args)


def pool_summaries(results, trajectory, exclude_jumps=True, when="after"):
    """Pool kick residuals over replicas into one :class:`RunSummary`."""
    residuals = []
    per_replica = []
    for r in results:
        s = residual_stats(r.kicks, trajectory, exclude_jumps, when)
        _, res = kick_residuals(r.kicks, trajectory, when)
        keep = np.ones(len(res), bool)
        if exclude_jumps:
            keep[excluded_kicks(r.kicks, trajectory)] = False
        residuals.append(res[keep])
        per_replica.append({"replica": r.replica, "seed": r.seed, "n_pulses": r.n_pulses,
                            "n_detected": r.n_detected, **s.to_dict()})
        del per_replica[-1]["replicas"]
    mean, std = _stats(np.concatenate(residuals))
    return RunSummary(mean, std, sum(p["kick_count"] for p in per_replica),
                      sum(p["abstain_count"] for p in per_replica),
                      sum(p["excluded_count"] for p in per_replica), per_replica)


def run_scenario(config: ScenarioConfig, jobs=None, write=True):
    """Run every replica of ``config`` and optionally write outputs to ``config.out``.

    Replica ``i`` uses seed ``config.seed + i``, so results do not depend on
    execution order or on ``jobs``.
    """
    jobs = jobs or config.jobs or min(config.replicas, os.cpu_count() or 1)
    tasks = [(config, i) for i in range(config.replicas)]
    if jobs > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    summary = pool_summaries(results, config.trajectory, config.exclude_jumps)
    if write and config.out:
        emit_outputs(results, summary, config, config.out)
    return summary, results


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_kicks_csv(path, kicks, trajectory):
    true_eps, residual = kick_residuals(kicks, trajectory)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KICKS_HEADER)
        for k, te, r in zip(kicks, true_eps, residual):
            w.writerow([_fmt(v) for v in (k.kick_index, k.time_s, k.window_events, k.r0_star,
                                           k.r1_star, k.eps_hat, k.applied_correction,
                                           k.abstained, te, r)])


def write_events_csv(path, events):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENTS_HEADER)
        cols = (events.pulse_index, events.time, events.alice_bit, events.bob_basis,
                events.outcome, events.true_eps, events.residual_eps)
        for row in zip(*cols):
            w.writerow([_fmt(v.item()) for v in row])


def output_names(replica, replicas):
    """File names for one replica: unsuffixed for single-replica runs."""
    if replicas == 1:
        return "kicks.csv", "events.csv"
    return f"kicks_{replica:03d}.csv", f"events_{replica:03d}.csv"


def emit_outputs(results, summary: RunSummary, config: ScenarioConfig, out_dir):
    """Write per-replica kick CSVs, optional events CSVs and ``summary.json``.

    Raises
    ------
    OSError
        With the failing path in the message.
    """
    out = Path(out_dir)
    path = out
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for r in results:
            kicks_name, events_name = output_names(r.replica, config.replicas)
            path = out / kicks_name
            write_kicks_csv(path, r.kicks, config.trajectory)
            written.append(path)
            if r.events is not None:
                path = out / events_name
                write_events_csv(path, r.events)
                written.append(path)
        path = out / "summary.json"
        doc = {**summary.to_dict(), "seed": config.seed, "config": config.to_dict()}
        path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")
        written.append(path)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return written


def load_summary(path):
    """Read ``summary.json`` back into ``(RunSummary, ScenarioConfig)``."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunSummary.from_dict(doc), ScenarioConfig.from_dict(doc["config"])
