"""
Ablation runner - train each arm on the same scenes and compare drift.

Arms:
- full: memory stream + zero-init injector
- no-mamba-update: update gain alpha = 0 (buffer stores raw features)
- no-memory: windowed backbone only
- no-zero-init: injector output layer drawn at random

All arms of one seed share the backbone and memory-stream initialisation
bytes; only the no-zero-init arm's injector differs.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import ConfigError, StateError
from core.harness.constants import (
    ABLATION_ARMS,
    ABLATION_EVAL_SEED_OFFSET,
    ABLATION_PROFILE,
    ABLATION_TRAIN_SCENES,
    ABLATION_TRAIN_SEED_STRIDE,
)
from core.harness.scene import SyntheticScene, gen_scene
from core.params import hash_groups
from core.pipeline import evaluate_drift, init_model, run_sequence, train
from core.pipeline.model import ModelParams
from core.schemas import SCHEMA_VERSION, AblationRow, RunConfig


logger = logging.getLogger(__name__)


def arm_config(base: RunConfig, arm: str, seed: int) -> RunConfig:
    changes = {
        "full": {},
        "no-mamba-update": {"alpha": 0.0},
        "no-memory": {"memory_enabled": False},
        "no-zero-init": {"zero_init": False},
    }[arm]
    return base.with_updates(seed=seed, **changes)


def identity_deviation(model: ModelParams, config: RunConfig, scene: SyntheticScene, n_windows: int = 2) -> float:
    """Max abs difference between the pipeline and the bare windowed backbone."""
    with_memory = run_sequence(scene.frames, model, config, n_windows=n_windows)
    bare = run_sequence(scene.frames, model, config, use_memory=False, n_windows=n_windows)
    worst = 0.0
    for a, b in zip(with_memory.predictions, bare.predictions):
        for x, y in ((a.quaternion, b.quaternion), (a.translation, b.translation),
                     (a.depth, b.depth), (a.pointmap, b.pointmap)):
            worst = max(worst, float(np.max(np.abs(x.data - y.data))))
    return worst


def _check_shared_init(models: dict[str, ModelParams]) -> None:
    hashes = {arm: hash_groups(m.named()) for arm, m in models.items()}
    reference = hashes["full"]
    for arm, groups in hashes.items():
        shared = ["backbone", "memory"] + ([] if arm == "no-zero-init" else ["injector"])
        differing = [g for g in shared if groups[g] != reference[g]]
        if differing:
            raise StateError(f"Ablation arm '{arm}' does not share initial {differing} with 'full'")


def run_ablation(
    base: RunConfig,
    seeds: Sequence[int],
    n_frames: int,
    arms: Sequence[str] = ABLATION_ARMS,
    profile: str = ABLATION_PROFILE,
    train_scenes: int = ABLATION_TRAIN_SCENES,
) -> pd.DataFrame:
    """
    Train and evaluate every arm for every seed.

    Args:
        base: Configuration shared by all arms (training budget included)
        seeds: One paired run per seed
        n_frames: Frames per training / evaluation scene
        arms: Subset of ABLATION_ARMS ("full" is always included for the hash check)
        profile: Motion profile of the scenes
        train_scenes: Training clips per seed, cycled step by step

    Returns:
        DataFrame with one AblationRow per (arm, seed)
    """
    if train_scenes < 1:
        raise ConfigError(f"run_ablation needs at least one training scene, got {train_scenes}")
    arms = list(dict.fromkeys(["full", *arms]))
    rows = []
    for seed in seeds:
        dataset = [
            gen_scene(seed + k * ABLATION_TRAIN_SEED_STRIDE, n_frames, profile,
                      base.image_size, base.patch_size, base.channels)
            for k in range(train_scenes)
        ]
        eval_scene = gen_scene(seed + ABLATION_EVAL_SEED_OFFSET, n_frames, profile,
                               base.image_size, base.patch_size, base.channels)
        configs = {arm: arm_config(base, arm, seed) for arm in arms}
        initial = {arm: init_model(cfg) for arm, cfg in configs.items()}
        _check_shared_init(initial)

        for arm in arms:
            config = configs[arm]
            deviation = identity_deviation(initial[arm], config, eval_scene) if config.memory_enabled else 0.0
            trained = train(config, dataset, model=initial[arm]).model
            report = evaluate_drift(trained, config, eval_scene)
            rows.append(AblationRow(
                arm=arm,
                seed=seed,
                endpoint_drift=report.endpoint_drift,
                pointmap_mse=report.pointmap_mse,
                accuracy_mean=report.accuracy_mean,
                accuracy_median=report.accuracy_median,
                completeness_mean=report.completeness_mean,
                completeness_median=report.completeness_median,
                normal_consistency_mean=report.normal_consistency_mean,
                normal_consistency_median=report.normal_consistency_median,
                step0_identity_deviation=deviation,
            ))
            logger.info("ablation seed=%d arm=%s drift=%.4f", seed, arm, report.endpoint_drift)

    return pd.DataFrame([r.model_dump() for r in rows], columns=list(AblationRow.model_fields))


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Per-arm means over seeds."""
    return table.drop(columns=["seed"]).groupby("arm", sort=False).mean()


def write_ablation_json(table: pd.DataFrame, path: str | Path, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "arms": table.to_dict(orient="records"),
        "summary": summarize(table).to_dict(orient="index"),
        **(extra or {}),
    }
    path.write_text(json.dumps(payload, indent=2))
    return path
