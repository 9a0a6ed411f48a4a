import argparse
import json
import sys
from typing import Any, Dict, List, Optional, Type

from pydantic import BaseModel, ValidationError
from tabulate import tabulate
from termcolor import colored

from vmtunet.config.config import VERSION
from vmtunet.core.errors import DecodeError, Diverged, IoError, VMTUNetError
from vmtunet.core.models.models import (
    AblateOptions,
    BoundaryKind,
    EvalOptions,
    FNetKind,
    GenOptions,
    InitKind,
    LossKind,
    PanelOptions,
    Scheme,
    SegmentCHOptions,
    SegmentCVOptions,
    ShapeFamily,
    Split,
    SweepOptions,
    TrainOptions,
)
from vmtunet.core.orchestrator.orchestrator import Orchestrator
from vmtunet.core.training.experiments import ABLATIONS, SWEEP_AXES
from vmtunet.utils.logger import logger, set_log_level

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

OPTIONS: Dict[str, Type[BaseModel]] = {
    "gen": GenOptions,
    "segment-cv": SegmentCVOptions,
    "segment-ch": SegmentCHOptions,
    "train": TrainOptions,
    "eval": EvalOptions,
    "ablate": AblateOptions,
    "sweep": SweepOptions,
    "panel": PanelOptions,
}


def int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _choices(enum) -> List[str]:
    return [e.value for e in enum]


def _add_train_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=str, help="Dataset manifest (JSON lines)")
    p.add_argument("--channels", type=int_list, help="UNet channels vector, e.g. 8,8,16")
    p.add_argument("--f-net", dest="f_net", choices=_choices(FNetKind), help="Force network family")
    p.add_argument(
        "--flat-widths", dest="flat_widths", type=int_list, help="Widths of the flat ablation nets"
    )
    p.add_argument("--blocks", type=int, help="Number of unrolled blocks M (default: 10)")
    p.add_argument("--tau", type=float, help="Time step inside a block (default: 0.05; 0.5 diverges at h = 1)")
    p.add_argument("--eps1", type=float, help="Gradient-term coefficient (default: 1)")
    p.add_argument("--eps2", type=float, help="Double-well scale (default: 1)")
    p.add_argument("--h", type=float, help="Grid spacing (default: 1)")
    p.add_argument("--scheme", choices=_choices(Scheme), help="Laplacian of u inside blocks")
    p.add_argument("--bc", choices=_choices(BoundaryKind), help="Boundary condition in blocks")
    p.add_argument(
        "--freeze-tfpm-center",
        dest="freeze_tfpm_center",
        action="store_true",
        default=None,
        help="Do not backpropagate through the center dependence of the TFPM stencil",
    )
    p.add_argument("--epochs", type=int, help="Training epochs (default: 600)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default: 1e-3)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="Mini-batch size (default: 4)")
    p.add_argument("--loss", choices=_choices(LossKind), help="Training loss (default: bce)")
    p.add_argument("--seed", type=int, help="Random seed (default: 7)")
    p.add_argument("--eval-every", dest="eval_every", type=int, help="Epochs between evaluations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmtunet", description="Cahn-Hilliard variational segmentation and its unrolled network."
    )
    parser.add_argument("--version", action="version", version=f"vmtunet {VERSION}")
    parser.add_argument("--log-level", dest="log_level", default=None, help="debug, info, warning, ...")
    parser.add_argument("--progress", action="store_true", help="Show progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, help="JSON file with option defaults; flags win")
        return p

    p = command("gen", "Generate a synthetic dataset")
    p.add_argument("--spec", type=str, help="JSON file holding the generator settings")
    p.add_argument("--out", type=str, help="Output directory")
    p.add_argument("--count", type=int)
    p.add_argument("--test-count", dest="test_count", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--family", choices=_choices(ShapeFamily))
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--seed", type=int)

    p = command("segment-cv", "Chan-Vese level-set segmentation")
    p.add_argument("--image", type=str, help="Input image")
    p.add_argument("--out", type=str, help="Output mask")
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--reinit-every", dest="reinit_every", type=int)
    p.add_argument("--init", choices=[InitKind.CHECKERBOARD.value, InitKind.CIRCLE.value])
    p.add_argument("--truth", type=str, help="Ground-truth mask; reports dice")

    p = command("segment-ch", "Classical modified Cahn-Hilliard segmentation")
    p.add_argument("--image", type=str, help="Input image")
    p.add_argument("--out", type=str, help="Output mask")
    p.add_argument("--scheme", choices=_choices(Scheme))
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--eps3", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--inner", type=int, help="Inner evolution steps per outer iteration")
    p.add_argument("--outer", type=int, help="Outer c1/c2 updates")
    p.add_argument("--bc", choices=_choices(BoundaryKind))
    p.add_argument("--init", choices=_choices(InitKind))
    p.add_argument("--truth", type=str, help="Ground-truth mask; reports dice")

    p = command("train", "Train the unrolled network")
    _add_train_arguments(p)
    p.add_argument("--ckpt", type=str, help="Checkpoint path")

    p = command("eval", "Evaluate a checkpoint")
    p.add_argument("--manifest", type=str)
    p.add_argument("--ckpt", type=str)
    p.add_argument("--out", type=str, help="Per-image metrics CSV")
    p.add_argument("--split", choices=_choices(Split))

    p = command("ablate", "Compare force networks or block Laplacians")
    p.add_argument("--what", choices=sorted(ABLATIONS))
    p.add_argument("--out", type=str, help="Result CSV")
    _add_train_arguments(p)

    p = command("sweep", "Train one model per hyperparameter value")
    p.add_argument("--axis", choices=sorted(SWEEP_AXES))
    p.add_argument("--values", type=float_list, help="Comma-separated values")
    p.add_argument("--out", type=str, help="Result CSV")
    _add_train_arguments(p)

    p = command("panel", "Compose a side-by-side comparison strip")
    p.add_argument("--images", nargs="+", help="Input images, one per row")
    p.add_argument("--masks", nargs="+", help="Masks, the same number for every image")
    p.add_argument("--out", type=str, help="Output PNG")
    p.add_argument("--contour", action="store_true", default=None, help="Draw the first mask's contour")
    p.add_argument("--scale", type=int, help="Integer upscaling factor")
    return parser


def load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise IoError(f"cannot read config '{path}': {e}") from e
    except json.JSONDecodeError as e:
        raise DecodeError(path, str(e)) from e
    if not isinstance(data, dict):
        raise DecodeError(path, "config must be a JSON object")
    return data


def resolve_options(args: argparse.Namespace) -> BaseModel:
    """Config-file values first, then every flag that was given on the command line."""
    merged: Dict[str, Any] = load_config(args.config) if args.config else {}
    skip = {"command", "config", "log_level", "progress"}
    merged.update({k: v for k, v in vars(args).items() if k not in skip and v is not None})
    return OPTIONS[args.command].model_validate(merged)


def _fail(message: str, code: int) -> int:
    print(colored(f"error: {message}", "red"), file=sys.stderr)
    return code


def print_summary(command: str, summary: Dict[str, Any]) -> None:
    table = summary.pop("table", None)
    if table is not None:
        print(tabulate(table, headers="keys", tablefmt="github", showindex=False, floatfmt=".4f"))
    if summary:
        print(tabulate(summary.items(), headers=["Field", "Value"], tablefmt="github"))
    print(colored(f"{command}: done", "green"))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        try:
            set_log_level(args.log_level)
        except ValueError as e:
            return _fail(str(e), EXIT_USAGE)

    try:
        options = resolve_options(args)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "options"
        return _fail(f"{args.command}: {where}: {first['msg']}", EXIT_USAGE)
    except (DecodeError, IoError) as e:
        return _fail(str(e), EXIT_IO)

    orchestrator = Orchestrator(disable_tqdm=not args.progress)
    handlers = {
        "gen": orchestrator.gen,
        "segment-cv": orchestrator.segment_cv,
        "segment-ch": orchestrator.segment_ch,
        "train": orchestrator.train,
        "eval": orchestrator.evaluate,
        "ablate": orchestrator.ablate,
        "sweep": orchestrator.sweep,
        "panel": orchestrator.panel,
    }
    try:
        summary = handlers[args.command](options)
    except Diverged as e:
        logger.error(str(e))
        return _fail(str(e), EXIT_DIVERGED)
    except (DecodeError, IoError) as e:
        return _fail(str(e), EXIT_IO)
    except (VMTUNetError, ValueError) as e:
        return _fail(f"{args.command}: {e}", EXIT_USAGE)
    print_summary(args.command, summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
