"""Character error rate, text normalization and the deterministic mock recognizer."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import signal

from micloc.dsp import AudioClip
from micloc.errors import UndefinedRateError
from micloc.geom import Position3D, radial_distance

# Replacement characters survive normalization; the mock only uses those absent from the reference.
REPLACEMENT_POOL = "abcdefghijklmnopqrstuvwxyz0123456789àáâãäåæçèéêëìíîïðñòóôõöøùúûüýþÿ"

_PUNCTUATION = re.compile(r"[^\w\s']")
_WHITESPACE = re.compile(r"\s+")


def normalize_text(text: str, enabled: bool = True) -> str:
    """Lowercase, drop punctuation except apostrophes, collapse whitespace."""
    if not enabled:
        return text
    text = _PUNCTUATION.sub(" ", text.lower())
    return _WHITESPACE.sub(" ", text).strip()


def validate_transcript(text: str) -> bool:
    """False when the transcript carries control characters other than tab and newlines."""
    return re.search(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]", text) is None


class TranscriptPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    reference: str
    hypothesis: str

    @field_validator("reference")
    @classmethod
    def _reference_not_empty(cls, value):
        if not normalize_text(value):
            raise ValueError("reference transcript is empty after normalization")
        return value


@dataclass(frozen=True)
class CerScore:
    distance: int
    reference_length: int
    cer: float


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs over Unicode code points."""
    if len(a) < len(b):
        a, b = b, a

    previous = list(range(len(b) + 1))
    for i, char_a in enumerate(a, 1):
        current = [i]
        for j, char_b in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (char_a != char_b),
            ))
        previous = current

    return previous[-1]


def cer_detail(reference: str, hypothesis: str, normalize: bool = True) -> CerScore:
    ref = normalize_text(reference, normalize)
    hyp = normalize_text(hypothesis, normalize)
    if not ref:
        raise UndefinedRateError("Character error rate is undefined for an empty reference")

    distance = edit_distance(ref, hyp)
    return CerScore(distance=distance, reference_length=len(ref), cer=100.0 * distance / len(ref))


def cer(reference: str, hypothesis: str, normalize: bool = True) -> float:
    """Character error rate in percent."""
    return cer_detail(reference, hypothesis, normalize).cer


def score_pair(pair: TranscriptPair, normalize: bool = True) -> CerScore:
    return cer_detail(pair.reference, pair.hypothesis, normalize)


class MockParams(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    seed: int = Field(default=0, ge=0)
    corruption_rate: float = Field(default=0.5, ge=0, le=1, description="Fraction of characters corrupted at full distortion")
    channel_weight: float = Field(default=1.0, ge=0, description="Weight of the log-spectral distance term")
    lsd_floor_db: float = 0.0
    lsd_ceiling_db: float = 20.0
    noise_weight: float = Field(default=0.0, ge=0, description="Weight of the noise-to-signal power ratio term")
    position_weight: float = Field(default=0.0, ge=0, description="Distortion per meter away from target")
    target: Optional[Position3D] = None

    @model_validator(mode="after")
    def _check_terms(self):
        if self.lsd_ceiling_db <= self.lsd_floor_db:
            raise ValueError("lsd_ceiling_db must exceed lsd_floor_db")
        if self.position_weight > 0 and self.target is None:
            raise ValueError("position_weight needs a target position")
        return self


def mock_transcribe(params: MockParams, reference: str, distortion: float, clip_hash: int) -> str:
    """Corrupt ``round(distortion * corruption_rate * len)`` characters of the reference."""
    if not 0.0 <= distortion <= 1.0:
        raise ValueError(f"distortion must lie in [0, 1], got {distortion}")

    n_corrupt = math.floor(distortion * params.corruption_rate * len(reference) + 0.5)
    if n_corrupt == 0:
        return reference

    rng = np.random.default_rng([params.seed, clip_hash])
    positions = rng.permutation(len(reference))[:n_corrupt]
    present = set(reference) | set(reference.lower())
    pool = [c for c in REPLACEMENT_POOL if c not in present]
    choices = rng.integers(len(pool), size=n_corrupt)

    chars = list(reference)
    for position, choice in zip(positions, choices):
        chars[position] = pool[choice]
    return "".join(chars)


def log_spectral_distance(reference: AudioClip, test: AudioClip, nperseg: int = 512, dynamic_range_db: float = 80.0) -> float:
    """Mean log-spectral distance in dB between two clips normalized to unit RMS."""
    n = min(len(reference), len(test))
    ref = reference.samples[:n]
    tst = test.samples[:n]
    ref = ref / max(np.sqrt(np.mean(ref ** 2)), 1e-12)
    tst = tst / max(np.sqrt(np.mean(tst ** 2)), 1e-12)

    nperseg = min(nperseg, n)
    _, _, ref_spec = signal.stft(ref, reference.sample_rate, nperseg=nperseg)
    _, _, tst_spec = signal.stft(tst, reference.sample_rate, nperseg=nperseg)
    ref_power = np.abs(ref_spec) ** 2
    tst_power = np.abs(tst_spec) ** 2

    floor = max(ref_power.max(), tst_power.max(), 1e-20) * 10 ** (-dynamic_range_db / 10)
    diff = 10 * np.log10(tst_power + floor) - 10 * np.log10(ref_power + floor)
    return float(np.mean(np.sqrt(np.mean(diff ** 2, axis=0))))


def channel_distortion(dry: AudioClip, rendered: AudioClip, params: MockParams,
                       snr_db: Optional[float] = None, position: Optional[Position3D] = None) -> float:
    """Degradation score in [0, 1] handed to the mock recognizer."""
    value = 0.0

    if params.channel_weight > 0:
        lsd = log_spectral_distance(dry, rendered)
        span = params.lsd_ceiling_db - params.lsd_floor_db
        value += params.channel_weight * min(max((lsd - params.lsd_floor_db) / span, 0.0), 1.0)

    if params.noise_weight > 0 and snr_db is not None:
        value += params.noise_weight * 10 ** (-snr_db / 10)

    if params.position_weight > 0 and position is not None:
        value += params.position_weight * radial_distance(position, params.target)

    return min(max(value, 0.0), 1.0)
