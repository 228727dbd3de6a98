"""Experiment config file: the serialized search config plus output and worker settings."""
from __future__ import annotations

import copy
import json
import logging
import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from micloc.dsp import parse_noise_option
from micloc.errors import ConfigurationError
from micloc.search import SearchConfig

logger = logging.getLogger(__name__)

SEED_ENVIRONMENT_VARIABLE = "MICLOC_SEED"
DEFAULT_NOISE_SWEEP_SNRS = [0.0, 5.0, 10.0, 15.0]


class SphereProbeSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    radius: float = Field(default=0.301, gt=0, description="Exact distance from the nominal microphone")
    count: int = Field(default=100, ge=1)


class ExperimentConfigFile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment_name: str = "unnamed"
    experiment_note: str = "No experiment specific notes provided"
    output_directory: Path = Path("results")
    jobs: int = Field(default=1, ge=1)
    search: SearchConfig
    sphere_probe: SphereProbeSettings = SphereProbeSettings()
    noise_sweep_snrs: list[float] = Field(default_factory=lambda: list(DEFAULT_NOISE_SWEEP_SNRS), min_length=1)


def _resolve(base: Path, value):
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else (base / path).resolve())


def _resolve_paths(data: dict, base: Path) -> dict:
    data = copy.deepcopy(data)
    if "output_directory" in data:
        data["output_directory"] = _resolve(base, data["output_directory"])
    else:
        data["output_directory"] = _resolve(base, "results")

    search = data.get("search")
    if isinstance(search, dict):
        for utterance in search.get("utterances") or []:
            if isinstance(utterance, dict) and utterance.get("audio_path"):
                utterance["audio_path"] = _resolve(base, utterance["audio_path"])
        noise = search.get("noise")
        if isinstance(noise, dict) and noise.get("path"):
            noise["path"] = _resolve(base, noise["path"])
    return data


def describe_validation_error(e: ValidationError) -> str:
    lines = []
    for error in e.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        if error["type"] == "extra_forbidden":
            lines.append(f"unknown key '{location}'")
        else:
            lines.append(f"{location}: {error['msg']}")
    return "; ".join(lines)


def load_experiment_config(config_path) -> ExperimentConfigFile:
    config_path = Path(config_path)
    try:
        with open(config_path, "r", encoding="utf-8") as fp:
            data = json.load(fp)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {config_path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Error loading config file {config_path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {config_path} must hold a JSON object")

    data = _resolve_paths(data, config_path.resolve().parent)

    try:
        config = ExperimentConfigFile.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid config file {config_path}: {describe_validation_error(e)}") from e

    logger.info(f"✅ Loaded config '{config.experiment_name}' from {config_path}")
    return config


def seed_from_environment() -> Optional[int]:
    value = os.getenv(SEED_ENVIRONMENT_VARIABLE)
    if value is None or value.strip() == "":
        return None
    try:
        seed = int(value)
    except ValueError as e:
        raise ConfigurationError(f"{SEED_ENVIRONMENT_VARIABLE} must be a non-negative integer, got '{value}'") from e
    if seed < 0:
        raise ConfigurationError(f"{SEED_ENVIRONMENT_VARIABLE} must be a non-negative integer, got '{value}'")
    return seed


def resolve_seed(config: ExperimentConfigFile, flag_seed: Optional[int]) -> int:
    """Flag first, then a seed set in the config file, then MICLOC_SEED, then 0."""
    if flag_seed is not None:
        return flag_seed
    if "master_seed" in config.search.model_fields_set:
        return config.search.master_seed
    environment_seed = seed_from_environment()
    return environment_seed if environment_seed is not None else config.search.master_seed


def apply_overrides(
    config: ExperimentConfigFile,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    noise: Optional[str] = None,
    snrs: Optional[list[float]] = None,
    output_directory: Optional[Path] = None,
    gammas: Optional[list[float]] = None,
    candidates: Optional[int] = None,
    debug_audio: bool = False,
) -> ExperimentConfigFile:
    """Config with command-line flags applied, re-validated as a whole."""
    data = config.model_dump(mode="python", exclude={"search"})
    search = config.search.model_dump(mode="python", exclude_unset=False)

    search["master_seed"] = resolve_seed(config, seed)

    if noise is not None:
        snr_db = snrs[0] if snrs else config.search.noise.snr_db
        search["noise"] = parse_noise_option(noise, snr_db).model_dump()
    elif snrs and config.search.noise.kind != "none":
        search["noise"] = config.search.noise.at_snr(snrs[0]).model_dump()
    elif snrs:
        raise ConfigurationError("--snr needs a noise kind: pass --noise white or --noise file:PATH")

    if snrs and len(snrs) > 1:
        data["noise_sweep_snrs"] = list(snrs)
    if gammas:
        search["gammas"] = list(gammas)
    if candidates is not None:
        search["candidates_per_gamma"] = candidates
    if debug_audio:
        search["debug_audio"] = True
    if jobs is not None:
        data["jobs"] = jobs
    if output_directory is not None:
        data["output_directory"] = Path(output_directory).resolve()

    try:
        return ExperimentConfigFile.model_validate({**data, "search": search})
    except ValidationError as e:
        raise ConfigurationError(f"Invalid command-line override: {describe_validation_error(e)}") from e
