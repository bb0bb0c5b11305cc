"""Command-line interface.

Subcommands:
  trial       run one trial, write its resolved config + result CSV
  sweep       run a change-ratio x scheme x seed grid, write results CSVs
  replay      re-run a saved trial or sweep config file
  dump-world  generate a world and write the landmark text format

Exit codes: 0 success, 1 configuration error, 2 partial trial failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import _kernels
from .bench import (results_to_csv, run_sweep, run_trial, summarize,
                    summary_to_csv)
from .config import (DEFAULT_RATIOS, DEFAULT_SCHEMES, SweepConfig,
                     TrialConfig, TRIAL_MAGIC, format_sweep_config,
                     format_trial_config, parse_sweep_config,
                     parse_trial_config)
from .world import InvalidParams, WorldParams, generate_world, quick_params, \
    save_world


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--config", help="config file (flat key = value text)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--quick", action="store_true",
                   help="small 200x50 m world profile (same density)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    ap = _Parser(prog="reloc2d",
                 description="budgeted map-matching relocalization benchmark")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trial", parents=[], help="run a single trial")
    _add_common(t)
    t.add_argument("--scheme", choices=DEFAULT_SCHEMES, help="order rule")
    t.add_argument("--change-ratio", type=float,
                   help="fraction of relocated landmarks in [0, 1]")
    t.add_argument("--diag", action="store_true",
                   help="write per-viewpoint diagnostics CSV")
    t.add_argument("--dump-features", action="store_true",
                   help="write the final local-map feature snapshot")

    s = sub.add_parser("sweep", help="run the trial grid")
    _add_common(s)
    s.add_argument("--ratios", help="comma list of change ratios")
    s.add_argument("--schemes", help="comma list of schemes")
    s.add_argument("--seeds", help="comma list of per-trial seeds")
    s.add_argument("--jobs", type=int, default=1,
                   help="concurrent trial processes")

    r = sub.add_parser("replay", help="re-run a saved config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--jobs", type=int, default=1)

    d = sub.add_parser("dump-world", help="write a generated world as text")
    d.add_argument("--seed", type=int, default=1)
    d.add_argument("--change-ratio", type=float, default=0.0)
    d.add_argument("--quick", action="store_true")
    d.add_argument("--out", required=True, help="output file")
    return ap


def _base_world(args) -> WorldParams:
    return quick_params() if getattr(args, "quick", False) else WorldParams()


def _load_text(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InvalidParams(f"cannot read config {path}: {exc}") from exc


def _cmd_trial(args):
    if args.config:
        cfg = parse_trial_config(_load_text(args.config), args.config)
        if args.quick:
            cfg = replace(cfg, world=quick_params())
    else:
        cfg = TrialConfig(world=_base_world(args))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.scheme:
        cfg = replace(cfg, scheme=args.scheme)
    if args.change_ratio is not None:
        cfg = replace(cfg, change_ratio=args.change_ratio)
    cfg.validate()
    os.makedirs(args.out, exist_ok=True)
    diag = os.path.join(args.out, "diagnostics.csv") if args.diag else None
    feats = (os.path.join(args.out, "features.txt")
             if args.dump_features else None)
    with open(os.path.join(args.out, "trial.cfg"), "w") as fh:
        fh.write(format_trial_config(cfg))
    result = run_trial(cfg, diag_path=diag, features_path=feats)
    with open(os.path.join(args.out, "results.csv"), "w") as fh:
        fh.write(results_to_csv([result]))
    err = ("none" if result.error_at_goal is None
           else f"{result.error_at_goal:.3f} m")
    print(f"trial scheme={cfg.scheme} ratio={cfg.change_ratio} "
          f"seed={cfg.seed}: status={result.status} error_at_goal={err}")
    return 0


def _parse_list(raw, conv, name):
    try:
        return tuple(conv(v) for v in raw.split(","))
    except ValueError as exc:
        raise InvalidParams(f"bad --{name} list: {exc}") from exc


def _cmd_sweep(args):
    if args.config:
        cfg = parse_sweep_config(_load_text(args.config), args.config)
        if args.quick:
            cfg = replace(cfg, world=quick_params())
    else:
        cfg = SweepConfig(world=_base_world(args), ratios=DEFAULT_RATIOS)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed,
                      seeds=tuple(args.seed + i for i in range(5)))
    if args.ratios:
        cfg = replace(cfg, ratios=_parse_list(args.ratios, float, "ratios"))
    if args.schemes:
        cfg = replace(cfg, schemes=_parse_list(args.schemes, str, "schemes"))
    if args.seeds:
        cfg = replace(cfg, seeds=_parse_list(args.seeds, int, "seeds"))
    cfg.validate()
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.cfg"), "w") as fh:
        fh.write(format_sweep_config(cfg))
    n_total = len(cfg.trials())

    def progress(res):
        err = ("none" if res.error_at_goal is None
               else f"{res.error_at_goal:.3f} m")
        print(f"  done {res.scheme} ratio={res.change_ratio} "
              f"seed={res.seed}: {err}", flush=True)

    print(f"sweep: {n_total} trials ({len(cfg.ratios)} ratios x "
          f"{len(cfg.schemes)} schemes x {len(cfg.seeds)} seeds), "
          f"jobs={args.jobs}, backend={_kernels.backend_name}")
    results, failures = run_sweep(cfg, jobs=args.jobs, progress=progress)
    with open(os.path.join(args.out, "results.csv"), "w") as fh:
        fh.write(results_to_csv(results))
    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write(summary_to_csv(summarize(results)))
    for _, msg in failures:
        print(f"trial failed: {msg}", file=sys.stderr)
    print(f"wrote {len(results)} rows to {args.out}/results.csv")
    return 2 if failures else 0


def _cmd_replay(args):
    text = _load_text(args.config)
    first = text.splitlines()[0].strip() if text else ""
    ns = argparse.Namespace(
        config=args.config, out=args.out, seed=None, quick=False,
        scheme=None, change_ratio=None, diag=False, dump_features=False,
        ratios=None, schemes=None, seeds=None, jobs=args.jobs,
    )
    if first == TRIAL_MAGIC:
        return _cmd_trial(ns)
    return _cmd_sweep(ns)


def _cmd_dump_world(args):
    params = replace(_base_world(args), change_ratio=args.change_ratio)
    world = generate_world(args.seed, params)
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    save_world(world, args.out)
    print(f"wrote {world.n_landmarks} landmarks to {args.out}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "trial":
            return _cmd_trial(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "dump-world":
            return _cmd_dump_world(args)
    except InvalidParams as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
