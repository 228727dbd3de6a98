"""Audio I/O, convolution and SNR-calibrated noise mixing.

A rendered microphone signal is ``y = h * u + n``: the dry utterance filtered
by the room, plus noise scaled against the reverberant signal's power.
"""
from __future__ import annotations

import hashlib
import io
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import soundfile as sf
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import signal

from micloc.errors import (
    CalibrationError,
    ConfigurationError,
    EmptyAudioError,
    MalformedHeaderError,
    SampleRateMismatchError,
    UnsupportedCodecError,
)
from micloc.rir import Rir

logger = logging.getLogger(__name__)

PIPELINE_SAMPLE_RATE = 16000
SUPPORTED_SUBTYPES = {"PCM_U8", "PCM_16", "PCM_24", "PCM_32", "FLOAT", "DOUBLE"}
_PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("an audio clip needs at least one mono sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio clip contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def power(self) -> float:
        return float(np.mean(self.samples ** 2))

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate)


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    kind: Literal["none", "white", "file"] = "none"
    path: Optional[Path] = None
    snr_db: Optional[float] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind != "none" and self.snr_db is None:
            raise ValueError(f"noise kind '{self.kind}' needs a finite snr_db")
        if self.kind == "file" and self.path is None:
            raise ValueError("noise kind 'file' needs a path")
        return self

    @property
    def label(self) -> str:
        if self.kind == "none":
            return "none"
        source = "white" if self.kind == "white" else Path(self.path).stem
        return f"{source}@{self.snr_db:g}dB"

    def at_snr(self, snr_db: float) -> "NoiseSpec":
        return NoiseSpec(kind=self.kind, path=self.path, snr_db=snr_db)


def parse_noise_option(option: str, snr_db: Optional[float]) -> NoiseSpec:
    """Parse the ``white | file:PATH | none`` command-line form."""
    try:
        if option == "none":
            return NoiseSpec()
        if option == "white":
            return NoiseSpec(kind="white", snr_db=snr_db)
        if option.startswith("file:") and len(option) > len("file:"):
            return NoiseSpec(kind="file", path=Path(option[len("file:"):]), snr_db=snr_db)
    except ValueError as e:
        raise ConfigurationError(f"Invalid noise option '{option}': {e}") from e
    raise ConfigurationError(f"Invalid noise option '{option}', expected white, file:PATH or none")


def convolve(u: AudioClip, h: Rir) -> AudioClip:
    if u.sample_rate != h.sample_rate:
        raise SampleRateMismatchError(u.sample_rate, h.sample_rate)
    return AudioClip(signal.fftconvolve(u.samples, h.samples, mode="full"), u.sample_rate)


@lru_cache(maxsize=16)
def _load_noise(path: str, sample_rate: int) -> np.ndarray:
    samples = read_wav(path, sample_rate).samples
    samples.setflags(write=False)
    return samples


def _noise_segment(spec: NoiseSpec, n_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "white":
        return rng.standard_normal(n_samples)

    recorded = _load_noise(str(spec.path), sample_rate)
    offset = int(rng.integers(recorded.size))
    # recorded noise shorter than the signal loops around
    return recorded[(offset + np.arange(n_samples)) % recorded.size]


def mix_noise(y_clean: AudioClip, spec: NoiseSpec, rng: np.random.Generator) -> AudioClip:
    """Add noise scaled so that the clip reaches ``spec.snr_db``."""
    if spec.kind == "none":
        return y_clean

    signal_power = y_clean.power
    if signal_power <= 0:
        raise CalibrationError("Cannot calibrate noise against a silent signal")

    noise = _noise_segment(spec, len(y_clean), y_clean.sample_rate, rng)
    noise_power = float(np.mean(noise ** 2))
    if noise_power <= 0:
        raise CalibrationError(f"Noise source {spec.path or spec.kind} is silent")

    scale = math.sqrt(signal_power / (noise_power * 10 ** (spec.snr_db / 10)))
    return AudioClip(y_clean.samples + scale * noise, y_clean.sample_rate)


def measure_snr(clean: AudioClip, noisy: AudioClip) -> float:
    residual = noisy.samples - clean.samples
    return 10 * math.log10(clean.power / float(np.mean(residual ** 2)))


def render(u: AudioClip, h: Rir, noise: NoiseSpec, rng: np.random.Generator) -> AudioClip:
    """Microphone signal for one utterance, peak-limited to [-1, 1]."""
    mixed = mix_noise(convolve(u, h), noise, rng)
    peak = float(np.max(np.abs(mixed.samples)))
    if peak > 1.0:
        # one gain for speech and noise keeps the realized SNR
        mixed = mixed.scaled(1.0 / peak)
    return mixed


def resample(samples: np.ndarray, from_rate: int, to_rate: int) -> np.ndarray:
    if from_rate == to_rate:
        return samples
    g = math.gcd(from_rate, to_rate)
    return signal.resample_poly(samples, to_rate // g, from_rate // g)


def read_wav(path, target_rate: int = PIPELINE_SAMPLE_RATE) -> AudioClip:
    path = Path(path)
    with open(path, "rb") as fp:
        header = fp.read(12)

    if len(header) < 12 or header[:4] not in (b"RIFF", b"RIFX", b"RF64") or header[8:12] != b"WAVE":
        raise MalformedHeaderError(path, "not a RIFF/WAVE file")

    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise MalformedHeaderError(path, str(e)) from e

    if info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedCodecError(path, f"unsupported WAV encoding {info.subtype}")
    if info.frames == 0:
        raise EmptyAudioError(path, "WAV file has no audio frames")

    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    mono = data.mean(axis=1)

    if rate != target_rate:
        logger.debug(f"Resampling {path.name} from {rate} Hz to {target_rate} Hz")
        mono = resample(mono, rate, target_rate)

    return AudioClip(mono, target_rate)


def _pcm16(clip: AudioClip) -> np.ndarray:
    return np.clip(np.round(clip.samples * _PCM16_SCALE), -32768, 32767).astype(np.int16)


def write_wav(clip: AudioClip, path):
    sf.write(str(path), _pcm16(clip), clip.sample_rate, subtype="PCM_16")


def wav_bytes(clip: AudioClip) -> bytes:
    buffer = io.BytesIO()
    sf.write(buffer, _pcm16(clip), clip.sample_rate, format="WAV", subtype="PCM_16")
    return buffer.getvalue()


def clip_hash(clip: AudioClip) -> int:
    digest = hashlib.blake2b(_pcm16(clip).tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def synthesize_utterance(duration: float, sample_rate: int, rng: np.random.Generator) -> AudioClip:
    """Voiced, syllable-modulated harmonic signal standing in for speech."""
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    f0 = rng.uniform(100.0, 220.0) * (1 + 0.05 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate

    formant = rng.uniform(500.0, 1500.0)
    voiced = np.zeros_like(t)
    for k in range(1, 30):
        if k * f0.max() >= sample_rate / 2:
            break
        voiced += np.exp(-((k * f0.mean() - formant) / 800.0) ** 2) * np.sin(k * phase) / k

    syllables = np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi)) ** 2
    samples = voiced * syllables + 0.02 * rng.standard_normal(t.size)
    return AudioClip(0.5 * samples / np.max(np.abs(samples)), sample_rate)
