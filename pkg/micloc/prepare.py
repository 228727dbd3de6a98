"""Experiment directories created from a blueprint config."""
from __future__ import annotations

import json
import logging
import shutil
from pathlib import Path
from typing import Optional

from micloc.dsp import PIPELINE_SAMPLE_RATE, synthesize_utterance, write_wav
from micloc.errors import ConfigurationError
from micloc.geom import derive_stream

logger = logging.getLogger(__name__)

BLUEPRINT_FILES = ["reference_results.json"]
SECONDS_PER_CHARACTER = 0.06


def demo_duration(text: str) -> float:
    return min(3.0, max(1.0, len(text) * SECONDS_PER_CHARACTER))


def write_demo_audio(config_data: dict, experiment_directory: Path) -> list[Path]:
    """Synthesize every utterance WAV the config references."""
    search = config_data.get("search", {})
    sample_rate = search.get("room", {}).get("sample_rate", PIPELINE_SAMPLE_RATE)
    written = []

    for utterance in search.get("utterances", []):
        path = Path(utterance["audio_path"])
        if not path.is_absolute():
            path = experiment_directory / path
        utterance_id = utterance.get("id") or path.stem
        rng = derive_stream(search.get("master_seed", 0), "demo", utterance_id)
        clip = synthesize_utterance(demo_duration(utterance["text"]), sample_rate, rng)

        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(clip, path)
        written.append(path)
        logger.info(f"✅ Synthesized {path} ({clip.duration:.2f} s)")

    return written


def prepare_experiment(
    experiment_name: str,
    note: Optional[str] = None,
    from_experiment: Optional[str] = None,
    demo_audio: bool = False,
    experiments_root: Path = Path("experiments"),
    resources_directory: Path = Path("resources"),
) -> Path:
    blueprint_path = Path(experiments_root) / from_experiment if from_experiment else Path(resources_directory)
    blueprint_config_file = blueprint_path / "config.json"
    experiment_directory = Path(experiments_root) / experiment_name

    try:
        with open(blueprint_config_file, "r", encoding="utf-8") as fp:
            config_data = json.load(fp)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Error loading blueprint config {blueprint_config_file}: {e}") from e

    config_data["experiment_name"] = experiment_name
    if note:
        config_data["experiment_note"] = note

    try:
        experiment_directory.mkdir(parents=True, exist_ok=False)
    except FileExistsError as e:
        raise ConfigurationError(f"Experiment directory already exists: {experiment_directory}") from e
    logger.info(f"✅ Created experiment directory: {experiment_directory}")

    config_file = experiment_directory / "config.json"
    with open(config_file, "w", encoding="utf-8") as fp:
        json.dump(config_data, fp, indent=2, ensure_ascii=False)
    logger.info(f"✅ Created config file: {config_file}")

    for name in BLUEPRINT_FILES:
        source_path = blueprint_path / name
        try:
            shutil.copy2(source_path, experiment_directory)
            logger.info(f"✅ Successfully copied: {source_path}")
        except OSError as e:
            logger.warning(f"⚠️  Could not copy {source_path}: {e}")

    if demo_audio:
        write_demo_audio(config_data, experiment_directory)

    (experiment_directory / "results").mkdir(exist_ok=True)
    return experiment_directory
