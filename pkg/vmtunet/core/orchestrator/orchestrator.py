"""Runs each command end to end: load inputs, call the solvers, write artifacts and stamps."""

import json
import os
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from vmtunet.config.config import VERSION
from vmtunet.core.autodiff.checkpoint import load_checkpoint, save_checkpoint
from vmtunet.core.cahn_hilliard.classical import ch_solve
from vmtunet.core.chan_vese.chan_vese import chan_vese_segment
from vmtunet.core.data.image_io import ensure_parent, read_image, read_mask, write_mask
from vmtunet.core.data.manifest import load_manifest, load_samples
from vmtunet.core.data.synthetic import generate
from vmtunet.core.errors import DecodeError, IoError
from vmtunet.core.models.models import (
    AblateOptions,
    EvalOptions,
    GenOptions,
    PanelOptions,
    RunStamp,
    SegmentCHOptions,
    SegmentCVOptions,
    Split,
    SweepOptions,
    SyntheticSpec,
    TrainConfig,
    TrainOptions,
)
from vmtunet.core.networks.model import VMTUNetModel
from vmtunet.core.training.experiments import ablate, sweep
from vmtunet.core.training.metrics import dice
from vmtunet.core.training.trainer import evaluate, train
from vmtunet.core.visualization.panel import compose_panel, save_panel
from vmtunet.utils.logger import add_json_file_handler, logger, remove_handler

RUN_LOG_NAME = "run.log.jsonl"


def stamp_path(out: str) -> str:
    return f"{out.rstrip('/').rstrip(os.sep)}.stamp.json"


def config_path(ckpt: str) -> str:
    return f"{ckpt}.config.json"


def train_config_of(options: BaseModel) -> TrainConfig:
    return TrainConfig.model_validate(options.model_dump(include=set(TrainConfig.model_fields)))


def write_json(path: str, payload: Dict[str, Any]) -> None:
    ensure_parent(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=4, sort_keys=True)
    except OSError as e:
        raise IoError(f"cannot write '{path}': {e}") from e


def write_stamp(command: str, options: BaseModel, out: str, seed: Optional[int] = None) -> str:
    stamp = RunStamp(
        command=command, config=options.model_dump(mode="json"), seed=seed, version=VERSION
    )
    path = stamp_path(out)
    write_json(path, stamp.model_dump(mode="json"))
    return path


def write_csv(frame, path: str) -> None:
    ensure_parent(path)
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise IoError(f"cannot write '{path}': {e}") from e


class Orchestrator:
    def __init__(self, disable_tqdm: bool = True):
        self.disable_tqdm = disable_tqdm

    def _run(self, command: str, out: str, log_dir: str, body: Callable[[], Dict[str, Any]]):
        os.makedirs(log_dir, exist_ok=True)
        handler = add_json_file_handler(os.path.join(log_dir, RUN_LOG_NAME))
        try:
            logger.info(f"{command} started", extra={"command": command, "out": out})
            summary = body()
            scalars = {k: v for k, v in summary.items() if isinstance(v, (int, float, str))}
            logger.info(f"{command} finished", extra={"command": command, **scalars})
            return summary
        finally:
            remove_handler(handler)

    @staticmethod
    def _log_dir(out: str) -> str:
        return os.path.dirname(os.path.abspath(out)) or "."

    # data

    def gen(self, options: GenOptions) -> Dict[str, Any]:
        base: Dict[str, Any] = {}
        if options.spec:
            try:
                with open(options.spec, "r", encoding="utf-8") as f:
                    base = json.load(f)
            except OSError as e:
                raise IoError(f"cannot read spec '{options.spec}': {e}") from e
            except json.JSONDecodeError as e:
                raise DecodeError(options.spec, str(e)) from e
        overrides = options.model_dump(exclude={"out", "spec"}, exclude_none=True)
        spec = SyntheticSpec.model_validate({**base, **overrides})

        def body():
            manifest = generate(spec, options.out, self.disable_tqdm)
            write_stamp("gen", spec, options.out, spec.seed)
            return {"samples": len(manifest.entries), "spec_hash": spec.spec_hash()}

        return self._run("gen", options.out, options.out, body)

    # classical solvers

    def _dice_against(self, truth: Optional[str], mask: np.ndarray) -> Optional[float]:
        if not truth:
            return None
        return dice([mask], [read_mask(truth)])

    def segment_cv(self, options: SegmentCVOptions) -> Dict[str, Any]:
        params = options.cv_params()
        image = read_image(options.image)

        def body():
            mask, trace = chan_vese_segment(image, params, options.init, self.disable_tqdm)
            write_mask(options.out, mask.values)
            write_csv(trace, f"{options.out}.trace.csv")
            write_stamp("segment-cv", options, options.out)
            summary = {"iterations": params.iters, "energy": float(trace["energy"].iloc[-1])}
            score = self._dice_against(options.truth, mask.values)
            if score is not None:
                summary["dice"] = score
            return summary

        return self._run("segment-cv", options.out, self._log_dir(options.out), body)

    def segment_ch(self, options: SegmentCHOptions) -> Dict[str, Any]:
        params = options.ch_params()
        image = read_image(options.image)

        def body():
            solution = ch_solve(
                image,
                params,
                options.init,
                options.outer,
                options.scheme,
                options.bc,
                disable_tqdm=self.disable_tqdm,
            )
            mask, trace = solution.mask, solution.trace
            write_mask(options.out, mask.values)
            write_csv(trace, f"{options.out}.trace.csv")
            write_stamp("segment-ch", options, options.out)
            last = trace.iloc[-1]
            summary = {
                "c1": float(last["c1"]),
                "c2": float(last["c2"]),
                "energy": float(last["energy"]),
                "stability_violations": solution.stability_violations,
            }
            score = self._dice_against(options.truth, mask.values)
            if score is not None:
                summary["dice"] = score
            return summary

        return self._run("segment-ch", options.out, self._log_dir(options.out), body)

    # learned model

    @staticmethod
    def _splits(manifest_path: str):
        manifest = load_manifest(manifest_path)
        train_set = load_samples(manifest, Split.TRAIN) or load_samples(manifest)
        test_set = load_samples(manifest, Split.TEST) or None
        return train_set, test_set

    def train(self, options: TrainOptions) -> Dict[str, Any]:
        config = train_config_of(options)
        train_set, test_set = self._splits(options.manifest)

        def body():
            model = VMTUNetModel(config)
            model, history = train(model, train_set, config, test_set, self.disable_tqdm)
            save_checkpoint(options.ckpt, model.state_dict())
            write_json(config_path(options.ckpt), config.model_dump(mode="json"))
            write_csv(history.to_frame(), f"{options.ckpt}.history.csv")
            write_stamp("train", options, options.ckpt, config.seed)
            last = history.records[-1]
            return {"epochs": config.epochs, "loss": last.loss, "dice": last.mean_dice}

        return self._run("train", options.ckpt, self._log_dir(options.ckpt), body)

    def load_model(self, ckpt: str) -> VMTUNetModel:
        path = config_path(ckpt)
        try:
            with open(path, "r", encoding="utf-8") as f:
                config = TrainConfig.model_validate_json(f.read())
        except OSError as e:
            raise IoError(f"cannot read model config '{path}': {e}") from e
        model = VMTUNetModel(config)
        model.load_state_dict(load_checkpoint(ckpt), ckpt)
        return model

    def evaluate(self, options: EvalOptions) -> Dict[str, Any]:
        model = self.load_model(options.ckpt)
        manifest = load_manifest(options.manifest)
        samples = load_samples(manifest, options.split) or load_samples(manifest)

        def body():
            record = evaluate(model, samples, model.config.epochs, model.config.loss)
            rows = [
                {
                    "index": i,
                    "overlap_accuracy": record.overlap_accuracy[i],
                    "pixel_accuracy": record.pixel_accuracy[i],
                    "dice": record.dice[i],
                    "empty_pair": i in record.empty_pairs,
                }
                for i in range(len(samples))
            ]
            write_csv(pd.DataFrame(rows), options.out)
            write_stamp("eval", options, options.out)
            return {
                "images": len(samples),
                "loss": record.loss,
                "overlap_accuracy": record.mean_overlap_accuracy,
                "overlap_accuracy_std": record.std_overlap_accuracy,
                "pixel_accuracy": record.mean_pixel_accuracy,
                "pixel_accuracy_std": record.std_pixel_accuracy,
                "dice": record.mean_dice,
                "dice_std": record.std_dice,
            }

        return self._run("eval", options.out, self._log_dir(options.out), body)

    def ablate(self, options: AblateOptions):
        config = train_config_of(options)
        train_set, test_set = self._splits(options.manifest)

        def body():
            table = ablate(options.what, config, train_set, test_set)
            write_csv(table, options.out)
            write_stamp("ablate", options, options.out, config.seed)
            return {"table": table}

        return self._run("ablate", options.out, self._log_dir(options.out), body)

    def sweep(self, options: SweepOptions):
        config = train_config_of(options)
        train_set, test_set = self._splits(options.manifest)

        def body():
            table = sweep(options.axis, options.values, config, train_set, test_set)
            write_csv(table, options.out)
            write_stamp("sweep", options, options.out, config.seed)
            return {"table": table}

        return self._run("sweep", options.out, self._log_dir(options.out), body)

    def panel(self, options: PanelOptions) -> Dict[str, Any]:
        images: List[np.ndarray] = [read_image(p).values for p in options.images]
        masks: List[np.ndarray] = [read_mask(p) for p in options.masks]

        def body():
            grid = compose_panel(images, masks, contour=options.contour)
            save_panel(options.out, grid, options.scale)
            write_stamp("panel", options, options.out)
            return {"rows": len(images), "shape": list(grid.shape[:2])}

        return self._run("panel", options.out, self._log_dir(options.out), body)
