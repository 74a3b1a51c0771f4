"""
The ``maskworld`` command.

Every subcommand reads its inputs from files, writes its outputs next to
``resolved_config.toml`` and holds a lock on its output directory while
running. Failures print one line ``error: <Code>: <message>`` to stderr
and exit with status 1 (2 for configuration errors).
"""

import argparse
import json
import os
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterator, List, Optional

import pandas as pd
from dotenv import load_dotenv

from ..metrics.reports import quality_row, write_quality_report, write_success_report
from ..model.predictor import load_params, save_params
from ..model.training import train
from ..model.worlds import LearnedWorld
from ..planning.cem import STRATEGIES, plan_with_strategy
from ..planning.mpc import mpc_loop
from ..planning.policy_eval import evaluate_policy_family, noise_family
from ..render.camera import CameraModel
from ..render.frames import MaskVideo, read_mask_video, read_ppm, read_rgb_video, write_mask_video, write_rgb_video
from ..render.scene import ARM_COLOR, color_key_mask
from ..robot.urdf import load_urdf
from ..services.actions import load_actions, masks_from_actions, save_actions
from ..services.dataset import generate_dataset, load_dataset, load_tuple, read_manifest
from ..services.policies import load_policies
from ..services.simulator import OracleWorld
from ..services.tasks import get_task
from ..utils.errors import ConfigError, MaskWorldError, OutputLocked, ShapeError
from ..utils.logging import get_logger, set_verbose_mode
from ..utils.seeding import derive_rng
from .config import RunConfig, add_config_flags, resolve_config, write_resolved

logger = get_logger("cli")

LOCK_NAME = ".maskworld.lock"


@contextmanager
def output_lock(directory: Path) -> Iterator[Path]:
    """
    Exclusive lock on an output directory.

    Raises:
        OutputLocked: Another run holds the lock
    """
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLocked(f"{directory} is in use by another run (remove {path} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


def read_camera(path: str) -> CameraModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read camera {path}: {e}")
    return CameraModel.from_dict(data)


def _camera_path(args: argparse.Namespace, config: RunConfig) -> Optional[str]:
    return getattr(args, "camera", None) or config.camera.file or None


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}")


# Subcommands


def cmd_render_mask(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    camera = _camera_path(args, config)
    if camera is None:
        raise ConfigError("render-mask needs --camera or camera.file")
    with output_lock(out):
        chains = load_urdf(args.urdf or config.robot.urdf).split_manipulators()
        cam = read_camera(camera)
        actions = load_actions(args.actions)
        masks = masks_from_actions(actions, chains, cam, ik=config.ik_config())
        write_mask_video(out, masks)
        write_resolved(config, out)
    logger.success(f"Wrote {len(masks)} masks to {out}")
    return 0


def cmd_gen_data(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    with output_lock(out):
        generate_dataset(config.dataset_config(), out, config.ik_config())
        write_resolved(config, out)
    return 0


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    with output_lock(out.parent):
        tuples = load_dataset(args.data)
        result = train(tuples, config.train_config())
        save_params(out, result.model)
        result.write_log(_sibling(out, "_loss.csv"))
        write_resolved(config, out.parent)
    logger.success(f"Saved model parameters to {out}")
    return 0


def _find_record(data: str, tuple_id: str) -> dict:
    records = read_manifest(data)
    wanted = {tuple_id}
    if tuple_id.isdigit():
        wanted.add(f"{int(tuple_id):06d}")
    for record in records:
        if record["id"] in wanted:
            return record
    raise ConfigError(f"tuple '{tuple_id}' is not listed in {data}")


def cmd_rollout(args: argparse.Namespace, config: RunConfig) -> int:
    if not args.oracle and not args.model:
        raise ConfigError("rollout needs --model or --oracle")
    out = Path(args.out)
    with output_lock(out):
        item = load_tuple(args.data, _find_record(args.data, args.tuple))
        camera = _camera_path(args, config)
        cam = read_camera(camera) if camera else item.camera
        chains = item.chains
        ik = config.ik_config()
        actions = item.actions[1:]

        oracle = OracleWorld(chains, cam, ik)
        x0 = oracle.render(item.state)[0]
        _, truth, masks = oracle.rollout(actions, item.state)
        if args.oracle:
            world = oracle
        else:
            world = LearnedWorld(load_params(args.model), chains, cam, config.sampler_config(), ik)
        predicted = world.predict(x0, actions, item.state).video

        write_rgb_video(out, predicted)
        write_rgb_video(out / "truth", truth)
        write_mask_video(out / "truth", masks)
        row = quality_row(item.tuple_id, predicted, truth, masks)
        write_quality_report([row], out / "metrics.csv", out / "metrics.md")
        write_resolved(config, out)
    logger.info(f"🎬 Rollout of tuple {item.tuple_id}: PSNR {row.psnr:.2f} dB, Mask-IoU {row.mask_iou:.3f}")
    return 0


def cmd_plan(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    cfg = config.plan_config()
    if args.strategy:
        cfg = replace(cfg, strategy=args.strategy)
    with output_lock(out.parent):
        task = get_task(config.data.task)
        ik = config.ik_config()
        instance = task.sample(
            derive_rng(config.seed),
            jitter=config.camera.jitter,
            width=config.video.width,
            height=config.video.height,
            ik=ik,
        )
        env = OracleWorld(task.chains(), instance.camera, ik)
        if args.goal:
            goals = [read_ppm(g) for g in [args.goal, args.goal2] if g]
        else:
            goals = task.goal_frames(instance, env)
        expected = (instance.camera.height, instance.camera.width, 3)
        for goal in goals:
            if goal.shape != expected:
                raise ShapeError(f"goal image is {goal.shape}, camera renders {expected}")
        if args.model:
            world = LearnedWorld(load_params(args.model), env.chains, instance.camera, config.sampler_config(), ik)
        else:
            world = env

        if args.mpc:
            result = mpc_loop(
                world, env, instance.start, goals, cfg,
                max_cycles=config.plan.max_cycles,
                success=lambda state, _: task.success(instance, state),
                seed=config.seed,
            )
            summary = {"success": result.success, "cycles": result.cycles, "switched_at": result.switched_at}
            out.write_text(json.dumps(summary, indent=2), encoding="utf-8")
            result.log.to_csv(_sibling(out, "_cycles.csv"), index=False)
            if result.actions is not None:
                save_actions(_sibling(out, "_trajectory.json"), result.actions)
        else:
            x0 = env.render(instance.start)[0]
            plan = plan_with_strategy(world, x0, instance.start, goals[0], cfg, seed=config.seed)
            plan.write(out, _sibling(out, "_telemetry.csv"))
        write_resolved(config, out.parent)
    logger.success(f"Wrote plan to {out}")
    return 0


def cmd_policy_eval(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    if args.policies:
        policies = load_policies(args.policies)
    else:
        policies = noise_family(config.data.task, config.eval.noise_levels, config.eval.chunk)
    if not policies:
        raise ConfigError("no policies to evaluate")
    width, height = config.video.width, config.video.height
    with output_lock(out.parent):
        task = get_task(policies[0].policy_id)
        ik = config.ik_config()
        cam = task.camera(width=width, height=height)
        if args.model:
            world = LearnedWorld(load_params(args.model), task.chains(), cam, config.sampler_config(), ik)
        else:
            world = OracleWorld(task.chains(), cam, ik)
        table, episodes = evaluate_policy_family(
            policies, world, config.eval.episodes, config.seed, width, height, ik
        )
        summary = write_success_report(table, out, out.with_suffix(".md"))
        pd.DataFrame([summary]).to_csv(_sibling(out, "_summary.csv"), index=False)
        episodes.to_csv(_sibling(out, "_episodes.csv"), index=False)
        write_resolved(config, out.parent)
    logger.info(f"📊 MMRV {summary['mmrv']:.4f}, Pearson r {summary['pearson_r']:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    with output_lock(out.parent):
        pred = read_rgb_video(args.pred)
        truth = read_rgb_video(args.truth)
        if any(Path(args.truth).glob("mask_*.pbm")):
            masks = read_mask_video(args.truth)
        else:
            masks = MaskVideo(color_key_mask(truth.pixels, ARM_COLOR))
        row = quality_row(Path(args.pred).name, pred, truth, masks)
        write_quality_report([row], out, out.with_suffix(".md"))
        write_resolved(config, out.parent)
    logger.info(f"📏 PSNR {row.psnr:.2f} dB, SSIM {row.ssim:.4f}, Mask-IoU {row.mask_iou:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskworld",
        description="Embodiment masks, mask-conditioned video prediction, planning and evaluation",
        epilog="""
Examples:
  maskworld gen-data --config run.toml --out data/
  maskworld train --config run.toml --data data/ --out model/model.params
  maskworld rollout --model model/model.params --data data/ --tuple 0 --out rollout/
  maskworld eval --pred rollout/ --truth rollout/truth --out rollout/report.csv
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--quiet", action="store_true", help="Suppress progress output")
        add_config_flags(p)
        p.set_defaults(handler=handler)
        return p

    p = command("render-mask", cmd_render_mask, "Render embodiment masks for an action sequence")
    p.add_argument("--urdf", help="URDF file or bundled fixture name (default robot.urdf)")
    p.add_argument("--camera", help="Camera JSON (default camera.file)")
    p.add_argument("--actions", required=True, help="Action sequence JSON")
    p.add_argument("--out", required=True, help="Output directory for PBM frames")

    p = command("gen-data", cmd_gen_data, "Generate a training dataset")
    p.add_argument("--out", required=True, help="Dataset directory")

    p = command("train", cmd_train, "Train the latent predictor")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--out", required=True, help="Model parameter file")

    p = command("rollout", cmd_rollout, "Predict the video of a dataset tuple and score it")
    p.add_argument("--model", help="Model parameter file")
    p.add_argument("--oracle", action="store_true", help="Use the kinematic oracle world model")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--tuple", required=True, help="Tuple id or index")
    p.add_argument("--camera", help="Render from this camera JSON instead of the recorded one")
    p.add_argument("--out", required=True, help="Output directory")

    p = command("plan", cmd_plan, "Plan toward a goal image with CEM")
    p.add_argument("--goal", help="Goal PPM (default: the task's rendered goal)")
    p.add_argument("--goal2", help="Final goal PPM when --goal is a subgoal")
    p.add_argument("--strategy", choices=STRATEGIES, help="Overrides plan.strategy")
    p.add_argument("--model", help="Score with a learned model instead of the oracle")
    p.add_argument("--mpc", action="store_true", help="Run the receding-horizon loop in the oracle environment")
    p.add_argument("--out", required=True, help="Plan JSON (or MPC summary JSON)")

    p = command("policy-eval", cmd_policy_eval, "Real versus world-model success rates of a policy family")
    p.add_argument("--policies", help="Policy family JSON (default: eval.noise_levels on data.task)")
    p.add_argument("--model", help="Model parameter file (default: oracle proxy)")
    p.add_argument("--out", required=True, help="Success table CSV")

    p = command("eval", cmd_eval, "PSNR, SSIM and Mask-IoU of predicted frames")
    p.add_argument("--pred", required=True, help="Directory of predicted PPM frames")
    p.add_argument("--truth", required=True, help="Directory of true PPM frames (and PBM masks)")
    p.add_argument("--out", required=True, help="Report CSV")
    return parser


def _fail(error: BaseException, code: str) -> None:
    message = " ".join(str(error).split())
    print(f"error: {code}: {message}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_verbose_mode(False)
    try:
        config = resolve_config(args)
        return args.handler(args, config)
    except ConfigError as e:
        _fail(e, e.code)
        return 2
    except MaskWorldError as e:
        _fail(e, e.code)
        return 1
    except (RuntimeError, OSError, ValueError) as e:
        _fail(e, type(e).__name__)
        return 1
    except KeyboardInterrupt:
        _fail(RuntimeError("interrupted"), "Interrupted")
        return 1


if __name__ == "__main__":
    sys.exit(main())
