"""Monte-Carlo search for the microphone position with the lowest average CER.

For every sampled candidate the room impulse response is synthesized once,
each utterance is rendered through it, transcribed and scored. The candidate
with the lowest mean CER over utterances is the optimum; ties go to the lowest
generation index.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

import micloc
from micloc.adapters import AdapterConfig, MockAdapterConfig, Transcriber, build_transcriber
from micloc.dsp import AudioClip, NoiseSpec, read_wav, render, write_wav
from micloc.errors import AdapterError, ConfigurationError, ConstraintError, SamplingError, SearchFailedError
from micloc.geom import (
    MAX_CONSECUTIVE_REJECTIONS,
    BallConstraint,
    Position3D,
    derive_stream,
    gen_candidate,
    gen_on_sphere,
    is_inside,
    radial_distance,
)
from micloc.rir import RoomSpec, compute_rir, write_rir_csv, write_rir_wav
from micloc.scoring import cer_detail, channel_distortion, normalize_text

logger = logging.getLogger(__name__)

NOMINAL_INDEX = -1


class Utterance(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    audio_path: Path
    text: str

    @model_validator(mode="before")
    @classmethod
    def _default_id(cls, data):
        if isinstance(data, dict) and not data.get("id") and data.get("audio_path"):
            data = {**data, "id": Path(data["audio_path"]).stem}
        return data

    @field_validator("text")
    @classmethod
    def _text_not_empty(cls, value):
        if not normalize_text(value):
            raise ValueError("reference text is empty after normalization")
        return value


class SearchConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    room: RoomSpec
    source: Position3D = Field(description="Speaker position")
    nominal_mic: Position3D = Field(description="Measured, possibly erroneous, microphone position")
    gammas: list[PositiveFloat] = Field(min_length=1)
    candidates_per_gamma: int = Field(ge=1)
    utterances: list[Utterance] = Field(min_length=1)
    noise: NoiseSpec = NoiseSpec()
    adapter: AdapterConfig
    master_seed: int = Field(default=0, ge=0)
    normalize_text: bool = True
    evaluate_nominal: bool = True
    debug_audio: bool = False
    debug_audio_every: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _check_geometry(self):
        for label, point in (("source", self.source), ("nominal_mic", self.nominal_mic)):
            if not is_inside(self.room, point):
                raise ValueError(f"{label} {point} is not strictly inside the room")
        if radial_distance(self.source, self.nominal_mic) < 1e-9:
            raise ValueError("source and nominal_mic coincide")
        ids = [u.id for u in self.utterances]
        if len(set(ids)) != len(ids):
            raise ValueError(f"utterance ids must be unique, got {ids}")
        return self


class CandidateResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    position: Position3D
    gamma: float
    radial_distance: float
    utterance_ids: list[str]
    per_utterance_cer: list[Optional[float]]
    per_utterance_distance: list[Optional[int]]
    average_cer: Optional[float]
    excluded: bool = False
    errors: dict[str, str] = {}

    @model_validator(mode="after")
    def _check_average(self):
        if not self.excluded:
            mean = math.fsum(self.per_utterance_cer) / len(self.per_utterance_cer)
            if abs(mean - self.average_cer) > 1e-9:
                raise ValueError(f"average_cer {self.average_cer} is not the mean of per_utterance_cer ({mean})")
        return self


class Provenance(BaseModel):
    master_seed: int
    started_at: datetime
    finished_at: datetime
    adapter: str
    jobs: int
    version: str = micloc.__version__


class SearchResult(BaseModel):
    kind: Literal["ball", "sphere"] = "ball"
    candidates: list[CandidateResult]
    optimal: CandidateResult
    nominal: Optional[CandidateResult] = None
    config_echo: SearchConfig
    room_redraws: int = 0
    provenance: Provenance

    @property
    def failed_cells(self) -> int:
        return sum(len(c.errors) for c in self.candidates)

    @property
    def excluded(self) -> list[CandidateResult]:
        return [c for c in self.candidates if c.excluded]


@dataclass
class _SearchContext:
    config: SearchConfig
    clips: list[AudioClip]
    transcriber: Transcriber
    debug_audio_dir: Optional[Path]


def load_utterances(config: SearchConfig) -> list[AudioClip]:
    return [read_wav(u.audio_path, config.room.sample_rate) for u in config.utterances]


def _draw_inside_room(draw: Callable[[], Position3D], config: SearchConfig) -> tuple[Position3D, int]:
    redraws = 0
    for _ in range(MAX_CONSECUTIVE_REJECTIONS):
        position = draw()
        if is_inside(config.room, position) and radial_distance(position, config.source) > 1e-9:
            return position, redraws
        redraws += 1
    raise SamplingError(f"{MAX_CONSECUTIVE_REJECTIONS} consecutive candidates fell outside the room")


def ball_candidates(config: SearchConfig) -> tuple[list[tuple[int, float, Position3D]], int]:
    """Candidate positions for every gamma, one RNG substream per candidate index."""
    candidates = []
    redraws = 0
    index = 0

    for gamma in config.gammas:
        ball = BallConstraint(center=config.nominal_mic, radius=gamma)
        for _ in range(config.candidates_per_gamma):
            rng = derive_stream(config.master_seed, "candidate", index)
            position, n = _draw_inside_room(lambda: gen_candidate(ball, rng), config)
            candidates.append((index, gamma, position))
            redraws += n
            index += 1

    return candidates, redraws


def sphere_candidates(config: SearchConfig, radius: float, count: int) -> tuple[list[tuple[int, float, Position3D]], int]:
    candidates = []
    redraws = 0

    for index in range(count):
        rng = derive_stream(config.master_seed, "sphere", index)
        position, n = _draw_inside_room(lambda: gen_on_sphere(config.nominal_mic, radius, rng), config)
        candidates.append((index, radius, position))
        redraws += n

    return candidates, redraws


def evaluate_candidate(index: int, gamma: float, position: Position3D, context: _SearchContext) -> CandidateResult:
    config = context.config
    h = compute_rir(config.room, config.source, position)
    snr_db = config.noise.snr_db if config.noise.kind != "none" else None
    mock = config.adapter.params if isinstance(config.adapter, MockAdapterConfig) else None

    cers = []
    distances = []
    errors = {}

    for number, (utterance, dry) in enumerate(zip(config.utterances, context.clips)):
        # keyed by utterance id so list order never changes the noise realization
        rng = derive_stream(config.master_seed, "noise", index, utterance.id)
        rendered = render(dry, h, config.noise, rng)

        if context.debug_audio_dir is not None and number == 0 and index % config.debug_audio_every == 0:
            context.debug_audio_dir.mkdir(parents=True, exist_ok=True)
            write_wav(rendered, context.debug_audio_dir / f"candidate{index}_{utterance.id}.wav")
            write_rir_wav(h, context.debug_audio_dir / f"candidate{index}_rir.wav")
            write_rir_csv(h, context.debug_audio_dir / f"candidate{index}_rir.csv")
            logger.debug(f"Candidate {index}: RIR energy {h.energy:.3e}, {len(h)} samples")

        distortion = channel_distortion(dry, rendered, mock, snr_db, position) if mock else 0.0

        try:
            hypothesis = context.transcriber.transcribe(rendered, reference=utterance.text, distortion=distortion)
        except AdapterError as e:
            logger.error(f"❌ Candidate {index}, utterance {utterance.id}: {e}")
            errors[utterance.id] = str(e)
            cers.append(None)
            distances.append(None)
            continue

        score = cer_detail(utterance.text, hypothesis, config.normalize_text)
        cers.append(score.cer)
        distances.append(score.distance)

    excluded = bool(errors)
    average = None if excluded else math.fsum(cers) / len(cers)

    if excluded:
        logger.warning(f"⚠️  Candidate {index} at {position} excluded: {len(errors)} failed transcription(s)")
    else:
        logger.info(f"✅ Candidate {index} at {position}: average CER {average:.2f}")

    return CandidateResult(
        index=index,
        position=position,
        gamma=gamma,
        radial_distance=radial_distance(position, config.nominal_mic),
        utterance_ids=[u.id for u in config.utterances],
        per_utterance_cer=cers,
        per_utterance_distance=distances,
        average_cer=average,
        excluded=excluded,
        errors=errors,
    )


def select_optimal(candidates: list[CandidateResult]) -> CandidateResult:
    eligible = [c for c in candidates if not c.excluded]
    if not eligible:
        first_errors = "; ".join(next(iter(c.errors.values())) for c in candidates[:3] if c.errors)
        raise SearchFailedError(f"All {len(candidates)} candidates failed transcription (e.g. {first_errors})")
    return min(eligible, key=lambda c: (c.average_cer, c.index))


def _evaluate(kind, config, candidates, redraws, jobs, debug_audio_dir) -> SearchResult:
    started_at = datetime.now(timezone.utc)
    transcriber = build_transcriber(config.adapter, config.normalize_text)
    context = _SearchContext(
        config=config,
        clips=load_utterances(config),
        transcriber=transcriber,
        debug_audio_dir=Path(debug_audio_dir) if (config.debug_audio and debug_audio_dir) else None,
    )

    logger.info(f"▶️  Evaluating {len(candidates)} candidates x {len(config.utterances)} utterances "
                f"({config.noise.label} noise, {jobs} worker(s))")

    def evaluate(item):
        return evaluate_candidate(*item, context)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, candidates))
    else:
        results = [evaluate(item) for item in candidates]

    nominal = None
    if config.evaluate_nominal:
        nominal = evaluate_candidate(NOMINAL_INDEX, 0.0, config.nominal_mic, context)

    optimal = select_optimal(results)
    logger.info(f"✅ Optimal position {optimal.position} with average CER {optimal.average_cer:.2f} "
                f"at radial distance {optimal.radial_distance:.4f}")

    return SearchResult(
        kind=kind,
        candidates=results,
        optimal=optimal,
        nominal=nominal,
        config_echo=config,
        room_redraws=redraws,
        provenance=Provenance(
            master_seed=config.master_seed,
            started_at=started_at,
            finished_at=datetime.now(timezone.utc),
            adapter=transcriber.identity,
            jobs=jobs,
        ),
    )


def run_search(config: SearchConfig, jobs: int = 1, debug_audio_dir=None) -> SearchResult:
    candidates, redraws = ball_candidates(config)
    if redraws:
        logger.warning(f"⚠️  {redraws} candidate draw(s) fell outside the room and were redrawn")
    return _evaluate("ball", config, candidates, redraws, jobs, debug_audio_dir)


def run_sphere_probe(config: SearchConfig, radius: float, count: int, jobs: int = 1, debug_audio_dir=None) -> SearchResult:
    """Evaluate ``count`` positions exactly ``radius`` away from the nominal microphone."""
    if not radius > 0:
        raise ConstraintError(f"Sphere radius must be positive, got {radius}")
    if count < 1:
        raise ConfigurationError(f"Sphere probe needs at least one position, got {count}")

    candidates, redraws = sphere_candidates(config, radius, count)
    if redraws:
        logger.warning(f"⚠️  {redraws} sphere point(s) fell outside the room and were redrawn")
    return _evaluate("sphere", config, candidates, redraws, jobs, debug_audio_dir)


def run_noise_sweep(config: SearchConfig, snrs: list[float], jobs: int = 1, debug_audio_dir=None) -> dict[float, SearchResult]:
    """One full search per SNR over the same candidate set."""
    if config.noise.kind == "none":
        raise ConfigurationError("A noise sweep needs a noise kind (white or file)")
    if not snrs:
        raise ConfigurationError("A noise sweep needs at least one SNR")

    sweep = {}
    for snr_db in snrs:
        noisy_config = config.model_copy(update={"noise": config.noise.at_snr(snr_db)})
        debug_dir = Path(debug_audio_dir) / f"snr{snr_db:g}" if debug_audio_dir else None
        sweep[snr_db] = run_search(noisy_config, jobs=jobs, debug_audio_dir=debug_dir)
    return sweep
