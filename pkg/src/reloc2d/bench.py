"""Batch experiment runner: single trials, change-ratio sweeps, CSV output.

A trial generates a world, drives the robot down its trajectory through a
relocalizer, and reports the localization error at the goal. Everything is
deterministic in (config, seed); wall-clock timings are the one exception
and therefore live only in the optional per-viewpoint diagnostics file,
never in the results CSV.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TrialConfig
from .geometry import Pose2
from .global_map import GlobalMap
from .hypotheses import best_hypothesis
from .relocalizer import Relocalizer
from .rng import substream
from .world import generate_world, sense, step_robot, trajectory

RESULTS_MAGIC = "# reloc2d-results v1"
SUMMARY_MAGIC = "# reloc2d-summary v1"

RESULT_COLUMNS = (
    "change_ratio", "scheme", "seed", "status", "error_at_goal",
    "est_x", "est_y", "best_r", "best_q", "n_features", "n_hypotheses",
    "n_retired", "pairs_consumed", "pairs_scored", "n_viewpoints",
)


@dataclass
class TrialResult:
    change_ratio: float
    scheme: str
    seed: int
    status: str                  # "ok" | "no_estimate"
    error_at_goal: float | None
    est_x: float | None
    est_y: float | None
    best_r: float
    best_q: int
    n_features: int
    n_hypotheses: int
    n_retired: int
    pairs_consumed: int
    pairs_scored: int
    n_viewpoints: int
    series: list = field(default_factory=list, compare=False, repr=False)

    def sort_key(self):
        return (self.change_ratio, self.scheme, self.seed)

    def row(self):
        def num(v):
            return "" if v is None else repr(float(v))
        return ",".join([
            repr(float(self.change_ratio)), self.scheme, str(self.seed),
            self.status, num(self.error_at_goal), num(self.est_x),
            num(self.est_y), repr(float(self.best_r)), str(self.best_q),
            str(self.n_features), str(self.n_hypotheses),
            str(self.n_retired), str(self.pairs_consumed),
            str(self.pairs_scored), str(self.n_viewpoints),
        ])


def run_trial(cfg: TrialConfig, collect_series=False, diag_path=None,
              features_path=None, backend=None) -> TrialResult:
    """Run one trial to the goal. Deterministic in cfg (timings excluded)."""
    cfg.validate()
    params = cfg.resolved_world()
    scoring = cfg.resolved_scoring()
    world = generate_world(cfg.seed, params)
    gmap = GlobalMap.from_world(world, backend=backend)
    sensor_rng = substream(cfg.seed, "sensor")
    odom_rng = substream(cfg.seed, "odometry")
    scheme_rng = substream(cfg.seed, f"scheme:{cfg.scheme}")
    reloc = Relocalizer(gmap, scoring, scheme_rng,
                        range_sigma=params.range_sigma,
                        bearing_sigma=params.bearing_sigma)

    pose = Pose2(params.start_theta, params.start.x, params.start.y)
    commands = trajectory(params)
    series = []
    consumed = 0
    scored = 0
    want_series = collect_series or diag_path is not None

    def one_viewpoint(odo, obs):
        nonlocal consumed, scored
        t0 = time.perf_counter()
        stats = reloc.step(odo, obs)
        step_ms = (time.perf_counter() - t0) * 1e3
        consumed += stats.consumed
        scored += stats.scored
        if want_series:
            est = reloc.estimate()
            err = None
            if est is not None:
                err = math.hypot(est[0].x - pose.x, est[0].y - pose.y)
            series.append(_series_entry(stats, reloc, err, step_ms))

    one_viewpoint((0.0, 0.0), sense(world, pose, sensor_rng))
    for cmd in commands:
        pose, odo = step_robot(pose, cmd, odom_rng, params.odom_sigma_frac)
        one_viewpoint(odo, sense(world, pose, sensor_rng))

    est = reloc.estimate()
    if est is None:
        status, error, ex, ey, best_r = "no_estimate", None, None, None, 0.0
        best_q = 0
    else:
        est_pose, best_r = est
        ex, ey = est_pose.x, est_pose.y
        error = math.hypot(ex - pose.x, ey - pose.y)
        status = "ok"
        best = best_hypothesis(reloc.store, scoring.q_min)
        best_q = best.q
    result = TrialResult(
        change_ratio=cfg.change_ratio, scheme=cfg.scheme, seed=cfg.seed,
        status=status, error_at_goal=error, est_x=ex, est_y=ey,
        best_r=best_r, best_q=best_q, n_features=reloc.lm.n_features,
        n_hypotheses=reloc.store.n, n_retired=reloc.store.n_retired,
        pairs_consumed=consumed, pairs_scored=scored,
        n_viewpoints=len(commands) + 1,
        series=series if collect_series else [],
    )
    if diag_path is not None:
        write_diagnostics(series, reloc.config.k_groups, diag_path)
    if features_path is not None:
        reloc.lm.dump_features(features_path)
    return result


def _series_entry(stats, reloc, err, step_ms):
    entry = {
        "viewpoint": stats.viewpoint,
        "consumed": stats.consumed,
        "scored": stats.scored,
        "inliers": stats.inliers,
        "primed": stats.primed,
        "new_features": stats.new_features,
        "new_hypotheses": stats.new_hypotheses,
        "n_features": reloc.lm.n_features,
        "n_hypotheses": reloc.store.n,
        "n_live": reloc.store.n_live,
        "memory_peak": stats.memory_peak,
        "error": err,
        "step_ms": step_ms,
        "group_sizes": stats.group_sizes,
        "group_alloc": stats.group_alloc,
        "pairs": stats.pairs,
    }
    best = best_hypothesis(reloc.store, reloc.config.q_min)
    entry["best_r"] = best.r if best is not None else 0.0
    entry["best_q"] = best.q if best is not None else 0
    return entry


def write_diagnostics(series, k_groups, path):
    """Per-viewpoint diagnostics. The step_ms column is wall-clock time and
    is NOT deterministic; everything else is."""
    gcols = [f"n{i}" for i in range(k_groups)] + \
            [f"a{i}" for i in range(k_groups)]
    cols = ["viewpoint", "consumed", "scored", "inliers", "primed",
            "new_features", "new_hypotheses", "n_features", "n_hypotheses",
            "n_live", "memory_peak", "best_r", "best_q", "error",
            *gcols, "step_ms"]
    with open(path, "w") as fh:
        fh.write("# reloc2d-diagnostics v1\n")
        fh.write(",".join(cols) + "\n")
        for e in series:
            sizes = e["group_sizes"]
            alloc = e["group_alloc"]
            gs = list(sizes) if sizes is not None else [0] * k_groups
            ga = list(alloc) if alloc is not None else [0] * k_groups
            err = "" if e["error"] is None else repr(e["error"])
            row = [e["viewpoint"], e["consumed"], e["scored"], e["inliers"],
                   e["primed"], e["new_features"], e["new_hypotheses"],
                   e["n_features"], e["n_hypotheses"], e["n_live"],
                   e["memory_peak"], repr(e["best_r"]), e["best_q"], err,
                   *gs, *ga, f"{e['step_ms']:.3f}"]
            fh.write(",".join(str(v) for v in row) + "\n")


# --- results CSV ----------------------------------------------------------


def results_to_csv(results) -> str:
    lines = [RESULTS_MAGIC, ",".join(RESULT_COLUMNS)]
    for r in sorted(results, key=TrialResult.sort_key):
        lines.append(r.row())
    return "\n".join(lines) + "\n"


def parse_results(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != RESULTS_MAGIC:
        raise ValueError("not a results CSV")
    if lines[1] != ",".join(RESULT_COLUMNS):
        raise ValueError("results CSV column mismatch")
    out = []
    for ln in lines[2:]:
        v = ln.split(",")
        out.append(TrialResult(
            change_ratio=float(v[0]), scheme=v[1], seed=int(v[2]),
            status=v[3],
            error_at_goal=None if v[4] == "" else float(v[4]),
            est_x=None if v[5] == "" else float(v[5]),
            est_y=None if v[6] == "" else float(v[6]),
            best_r=float(v[7]), best_q=int(v[8]), n_features=int(v[9]),
            n_hypotheses=int(v[10]), n_retired=int(v[11]),
            pairs_consumed=int(v[12]), pairs_scored=int(v[13]),
            n_viewpoints=int(v[14]),
        ))
    return out


def summarize(results):
    """Per-(ratio, scheme) medians; a missing estimate counts as infinite
    error (the robust summary statistic for the bimodal outcome)."""
    groups = {}
    for r in results:
        groups.setdefault((r.change_ratio, r.scheme), []).append(r)
    rows = []
    for (ratio, scheme) in sorted(groups):
        rs = groups[(ratio, scheme)]
        errors = [r.error_at_goal if r.error_at_goal is not None
                  else math.inf for r in rs]
        rows.append({
            "change_ratio": ratio,
            "scheme": scheme,
            "n_trials": len(rs),
            "n_ok": sum(1 for r in rs if r.status == "ok"),
            "median_error": float(np.median(errors)),
            "max_error": float(np.max(errors)),
        })
    return rows


def summary_to_csv(rows) -> str:
    lines = [SUMMARY_MAGIC,
             "change_ratio,scheme,n_trials,n_ok,median_error,max_error"]
    for r in rows:
        lines.append(",".join([
            repr(float(r["change_ratio"])), r["scheme"],
            str(r["n_trials"]), str(r["n_ok"]),
            repr(float(r["median_error"])), repr(float(r["max_error"])),
        ]))
    return "\n".join(lines) + "\n"


# --- sweep -----------------------------------------------------------------


def _run_trial_worker(cfg):
    try:
        return run_trial(cfg), None
    except Exception as exc:  # isolate per-trial failures
        return None, (cfg, f"{type(exc).__name__}: {exc}")


def run_sweep(sweep_cfg, jobs=1, progress=None):
    """Run the full grid. Trials are independent; with jobs > 1 they run in
    worker processes. Output order never depends on scheduling. Returns
    (results, failures)."""
    trials = sweep_cfg.validate().trials()
    results = []
    failures = []
    if jobs and jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            for res, fail in ex.map(_run_trial_worker, trials):
                _collect(res, fail, results, failures, progress)
    else:
        for cfg in trials:
            res, fail = _run_trial_worker(cfg)
            _collect(res, fail, results, failures, progress)
    results.sort(key=TrialResult.sort_key)
    return results, failures


def _collect(res, fail, results, failures, progress):
    if res is not None:
        results.append(res)
        if progress:
            progress(res)
    else:
        failures.append(fail)
