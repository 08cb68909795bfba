"""Command-line interface: train / eval / ablate / export-clusters / replay."""
from __future__ import annotations

import argparse
import json
import os
import sys

# the dense nets here are tiny; BLAS thread pools only add overhead, and
# ablate parallelism comes from --workers instead
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from . import config as configlib  # noqa: E402
from . import harness  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contactcover",
        description="Contact-coverage exploration on the push-box testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(sp):
        sp.add_argument("--config", help="JSON config file (defaults used "
                                         "when omitted)")
        sp.add_argument("--variant", choices=configlib.VARIANTS)
        sp.add_argument("--seed", type=int, help="root seed")
        sp.add_argument("--steps", type=int, help="total environment steps")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted config override, repeatable "
                             "(e.g. rewards.explore_scale=0.2)")

    sp = sub.add_parser("train", help="train one run")
    add_config_flags(sp)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dump", help="write per-step trajectory JSONL here")
    sp.add_argument("--out", help="write eval_results.json here")

    sp = sub.add_parser("ablate", help="train + evaluate all variants "
                                       "over paired seeds")
    add_config_flags(sp)
    sp.add_argument("--seeds", type=int, default=5,
                    help="seeds per variant")
    sp.add_argument("--workers", type=int, default=1,
                    help="parallel training processes")
    sp.add_argument("--explore-scale", type=float, dest="explore_scale",
                    help="shortcut for rewards.explore_scale")

    sp = sub.add_parser("export-clusters",
                        help="hash visited object states, report per-side "
                             "modal indices")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="clusters.txt path (default: next to "
                                  "the checkpoint)")

    sp = sub.add_parser("replay", help="render a trajectory dump to PNG")
    sp.add_argument("--dump", required=True, help="JSONL from eval --dump")
    sp.add_argument("--out", default="replay.png")
    sp.add_argument("--env", type=int, default=0)
    sp.add_argument("--episode", type=int, default=0)
    return parser


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _resolve_config(args):
    """Config file + flag shortcuts + overrides, or an int error code."""
    if args.config is not None:
        if not os.path.isfile(args.config):
            return _fail(f"config file not found: {args.config}")
        try:
            cfg = configlib.load_json(args.config)
        except (ValueError, KeyError, TypeError) as exc:
            return _fail(f"malformed config {args.config}: {exc}")
    else:
        cfg = configlib.ExperimentConfig()
    overrides = []
    if args.variant is not None:
        overrides.append(f"variant={args.variant}")
    if args.seed is not None:
        overrides.append(f"root_seed={args.seed}")
    if args.steps is not None:
        overrides.append(f"total_steps={args.steps}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    if getattr(args, "explore_scale", None) is not None:
        overrides.append(f"rewards.explore_scale={args.explore_scale}")
    overrides.extend(args.override)
    try:
        return configlib.apply_overrides(cfg, overrides)
    except (ValueError, TypeError) as exc:
        return _fail(f"bad override: {exc}")


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if isinstance(cfg, int):
        return cfg
    summary = harness.run_training(cfg)
    print(json.dumps({k: summary[k] for k in
                      ("out_dir", "variant", "root_seed", "steps",
                       "episodes", "train_success_rate")}, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    if not os.path.isfile(args.checkpoint):
        return _fail(f"checkpoint not found: {args.checkpoint}")
    result = harness.evaluate(args.checkpoint, episodes=args.episodes,
                              seed=args.seed, dump_path=args.dump)
    line = {k: result[k] for k in ("episodes", "success_rate", "left_rate",
                                   "right_rate", "mean_task_return")}
    print(json.dumps(line, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval_results.json"), "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
    return 0


def _cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    if isinstance(cfg, int):
        return cfg
    if args.seeds < 1:
        return _fail("--seeds must be positive")
    summary = harness.ablate(cfg, seeds=args.seeds, workers=args.workers)
    for variant, row in summary["table"].items():
        print(f"{variant}: mean={row['mean']:.3f} std={row['std']:.3f}")
    print(f"gap: {summary['gap']:.3f}")
    return 0


def _cmd_export_clusters(args) -> int:
    if not os.path.isfile(args.checkpoint):
        return _fail(f"checkpoint not found: {args.checkpoint}")
    out = args.out
    if out is None:
        out = os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)),
                           "clusters.txt")
    summary = harness.export_clusters(args.checkpoint, samples=args.samples,
                                      seed=args.seed, out_path=out)
    print(json.dumps({k: summary[k] for k in
                      ("samples", "left_modal", "left_purity", "right_modal",
                       "right_purity", "distinct_modals")}, sort_keys=True))
    return 0


def _cmd_replay(args) -> int:
    if not os.path.isfile(args.dump):
        return _fail(f"dump file not found: {args.dump}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.dump) as fh:
        rows = [json.loads(line) for line in fh]
    rows = [r for r in rows
            if r["env"] == args.env and r["episode"] == args.episode]
    if not rows:
        return _fail(f"no steps for env {args.env} episode {args.episode}")

    t = [r["t"] for r in rows]
    ball = [r["ball"] for r in rows]
    fig, (ax, axr) = plt.subplots(1, 2, figsize=(11, 5))
    ax.plot([0, 1, 1, 0, 0], [0, 0, 1, 1, 0], color="0.6")
    ax.axhline(0.95, color="0.3", lw=2)
    first, last = rows[0], rows[-1]
    for box_x, style in ((first["box_x"], "--"), (last["box_x"], "-")):
        ax.add_patch(plt.Rectangle((box_x - 0.05, 0.85), 0.1, 0.1,
                                   fill=False, ls=style, ec="tab:orange"))
    ax.plot(first["goal_x"], 0.90, marker="*", ms=14, color="tab:green")
    pts = ax.scatter([b[0] for b in ball], [b[1] for b in ball],
                     c=t, s=12, cmap="viridis")
    fig.colorbar(pts, ax=ax, label="step")
    ax.set_aspect("equal")
    ax.set_title(f"env {args.env} episode {args.episode} "
                 f"({'success' if last['success'] else 'no success'})")

    for key in ("task_reward", "scaled_contact", "scaled_energy",
                "total_reward"):
        axr.plot(t, [r[key] for r in rows], label=key)
    axr.legend()
    axr.set_xlabel("step")
    axr.set_title("reward decomposition")
    fig.tight_layout()
    fig.savefig(args.out, dpi=110)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "export-clusters": _cmd_export_clusters,
    "replay": _cmd_replay,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)
