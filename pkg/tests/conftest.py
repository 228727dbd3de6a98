from pathlib import Path

import numpy as np
import pytest

from micloc.dsp import AudioClip, synthesize_utterance, write_wav
from micloc.geom import Position3D, derive_stream
from micloc.rir import RoomSpec
from micloc.search import SearchConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
RESOURCES = REPO_ROOT / "resources"

SENTENCES = [
    "the quick brown fox jumps over the lazy dog",
    "she sells sea shells by the sea shore",
    "please call stella and ask her to bring these things",
    "a stitch in time saves nine",
    "every good boy does fine",
]


@pytest.fixture
def l212_room():
    return RoomSpec(length=7.5, width=4.6, height=3.1, rt60=0.3)


@pytest.fixture
def small_room():
    return RoomSpec(length=4.0, width=3.5, height=3.0, rt60=0.25, rir_length=0.25)


@pytest.fixture
def tone_clip():
    t = np.arange(16000) / 16000
    return AudioClip(0.5 * np.sin(2 * np.pi * 440 * t), 16000)


@pytest.fixture
def write_utterances(tmp_path):
    """Write ``count`` synthetic utterance WAVs and return their config entries."""

    def _write(count, duration=1.0, sample_rate=16000):
        entries = []
        for number in range(count):
            clip = synthesize_utterance(duration, sample_rate, derive_stream(0, "fixture", number))
            path = tmp_path / "utterances" / f"utt_{number:02d}.wav"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_wav(clip, path)
            entries.append({"id": f"utt_{number:02d}", "audio_path": path, "text": SENTENCES[number % len(SENTENCES)]})
        return entries

    return _write


@pytest.fixture
def make_search_config(small_room, write_utterances):
    """SearchConfig over ``small_room`` with the mock adapter; keyword overrides win."""

    def _make(utterances=2, mock=None, **overrides):
        data = {
            "room": small_room,
            "source": Position3D(x=2.5, y=1.8, z=1.5),
            "nominal_mic": Position3D(x=1.0, y=1.5, z=1.2),
            "gammas": [0.3],
            "candidates_per_gamma": 5,
            "utterances": write_utterances(utterances) if isinstance(utterances, int) else utterances,
            "adapter": {"mode": "mock", "params": mock or {}},
            "evaluate_nominal": False,
        }
        data.update(overrides)
        return SearchConfig.model_validate(data)

    return _make
