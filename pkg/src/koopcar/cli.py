"""Command line interface.

Subcommands cover the whole workflow: collect simulator episodes, train,
evaluate open-loop prediction, run closed-loop tracking (predictive or pure
pursuit), generate references, and summarize saved tracking logs.

Exit codes: 0 success, 1 usage error, 2 malformed or missing data,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data as data_mod
from . import evaluate as eval_mod
from . import mpc as mpc_mod
from . import pursuit as pursuit_mod
from . import training as training_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError, NumericError


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for data
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="koopcar",
                     description="Koopman lifted-model vehicle pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command",
                               parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("sim-collect",
                       help="run the simulator and save an episode dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--episodes", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-len", type=int, default=1000)
    p.add_argument("--max-len", type=int, default=4000)

    p = sub.add_parser("train",
                       help="train a lifted model on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint path (json)")
    p.add_argument("--config", help="training config (ini)")
    p.add_argument("--log", help="per-epoch csv log path")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--lift-mode", choices=("concat", "encoder-only"))

    p = sub.add_parser("predict",
                       help="open-loop prediction RMSE on a dataset split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--horizon", type=int, default=120)
    p.add_argument("--out", help="report json path (default stdout)")

    p = sub.add_parser("track",
                       help="closed-loop predictive tracking of a reference")
    p.add_argument("--model", required=True)
    p.add_argument("--ref", required=True, help="reference csv")
    p.add_argument("--out", required=True, help="tracking log csv")
    p.add_argument("--report", help="metrics json path")
    p.add_argument("--horizon-pred", type=int, default=30)
    p.add_argument("--horizon-ctrl", type=int, default=30)

    p = sub.add_parser("baseline-pp",
                       help="closed-loop pure-pursuit tracking of a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="metrics json path")
    p.add_argument("--v-ref", type=float,
                   help="fixed target speed (default: per-step reference vx)")

    p = sub.add_parser("make-ref",
                       help="generate a feasible reference trajectory")
    p.add_argument("--pattern", required=True,
                   choices=eval_mod.REFERENCE_PATTERNS)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--v-ref", type=float, default=7.0)
    p.add_argument("--radius", type=float, default=40.0)
    p.add_argument("--amplitude", type=float, default=0.8)
    p.add_argument("--period", type=float, default=4.0)

    p = sub.add_parser("report",
                       help="summarize a saved tracking log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", help="json path (default stdout)")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_sim_collect(args) -> int:
    if args.min_len > args.max_len or args.min_len < 2:
        raise DataError("need 2 <= min-len <= max-len")
    ds = data_mod.collect_episodes(n_episodes=args.episodes, seed=args.seed,
                                   length_range=(args.min_len, args.max_len))
    data_mod.save_dataset(ds, args.out)
    rows = sum(len(ep) for ep in ds.episodes)
    print(f"saved {len(ds.episodes)} episodes ({rows} rows) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    ds = data_mod.load_dataset(args.data)
    if args.config:
        cfg = training_mod.load_train_config(args.config)
    else:
        cfg = training_mod.TrainConfig()
    for name in ("epochs", "steps_per_epoch", "seed", "latent_dim",
                 "horizon", "batch_size", "frames", "lift_mode"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    cfg.__post_init__()  # re-check after overrides
    model, rows = training_mod.train(ds, cfg, log_path=args.log,
                                     progress=args.progress)
    save_checkpoint(model, args.out)
    print(f"saved checkpoint to {args.out}  "
          f"(final val loss {rows[-1]['val_L']:.6f})")
    return 0


def _cmd_predict(args) -> int:
    model = load_checkpoint(args.model)
    ds = data_mod.load_dataset(args.data)
    episodes = ds.split(args.split)
    rmse = eval_mod.rmse_prediction(model, episodes, horizon=args.horizon)
    report = eval_mod.PredictionReport(
        rmse=rmse, horizon=args.horizon, n_episodes=len(episodes),
        checkpoint_sha256=eval_mod.file_sha256(args.model),
        dataset_sha256=eval_mod.file_sha256(
            Path(args.data) / data_mod.MANIFEST_NAME))
    _emit(report.to_json(), args.out)
    return 0


def _cmd_track(args) -> int:
    model = load_checkpoint(args.model)
    t_ref, ref_states = data_mod.load_reference(args.ref)
    cfg = mpc_mod.MpcConfig(horizon_pred=args.horizon_pred,
                            horizon_ctrl=args.horizon_ctrl)
    log = mpc_mod.track(model, (t_ref, ref_states), cfg=cfg)
    log.save_csv(args.out)
    errors = eval_mod.tracking_errors(log)
    if args.report:
        report = eval_mod.TrackingReport(
            errors=errors,
            controller={"type": "mpc", "horizon_pred": cfg.horizon_pred,
                        "horizon_ctrl": cfg.horizon_ctrl},
            checkpoint_sha256=eval_mod.file_sha256(args.model),
            reference_sha256=eval_mod.file_sha256(args.ref))
        _emit(report.to_json(), args.report)
    flag = "  DIVERGED" if log.diverged else ""
    print(f"tracked {errors['n_steps']} steps: p2p mean "
          f"{errors['p2p_mean']:.3f} m max {errors['p2p_max']:.3f} m, "
          f"solve mean {errors['solve_ms_mean']:.2f} ms{flag}")
    return 0


def _cmd_baseline_pp(args) -> int:
    t_ref, ref_states = data_mod.load_reference(args.ref)
    log = pursuit_mod.track_pursuit((t_ref, ref_states), v_ref=args.v_ref)
    log.save_csv(args.out)
    errors = eval_mod.tracking_errors(log)
    if args.report:
        report = eval_mod.TrackingReport(
            errors=errors, controller={"type": "pure-pursuit"},
            checkpoint_sha256="", reference_sha256=eval_mod.file_sha256(args.ref))
        _emit(report.to_json(), args.report)
    flag = "  DIVERGED" if log.diverged else ""
    print(f"tracked {errors['n_steps']} steps: p2p mean "
          f"{errors['p2p_mean']:.3f} m max {errors['p2p_max']:.3f} m{flag}")
    return 0


def _cmd_make_ref(args) -> int:
    ep = eval_mod.make_reference(args.pattern, args.steps, v_ref=args.v_ref,
                                 radius=args.radius, amplitude=args.amplitude,
                                 period_s=args.period)
    data_mod.save_reference(args.out, ep.t, ep.states)
    print(f"wrote {args.steps}-step {args.pattern} reference to {args.out}")
    return 0


def _cmd_report(args) -> int:
    log = mpc_mod.TrackingLog.load_csv(args.log)
    payload = {"format_version": eval_mod.REPORT_FORMAT_VERSION,
               "errors": eval_mod.tracking_errors(log)}
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return 0


_COMMANDS = {
    "sim-collect": _cmd_sim_collect,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "track": _cmd_track,
    "baseline-pp": _cmd_baseline_pp,
    "make-ref": _cmd_make_ref,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
