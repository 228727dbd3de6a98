"""Transcriber transports: external recognizer by subprocess or HTTP, or the hermetic mock.

Subprocess protocol: ``<command...> <wav_path>`` prints the transcript on
stdout and exits 0. HTTP protocol: POST the WAV bytes as ``audio/wav``, the
``text/plain`` response body is the transcript.
"""
from __future__ import annotations

import html
import logging
import subprocess
import tempfile
import threading
from pathlib import Path
from typing import Annotated, Literal, Optional, Protocol, Union

import requests
from pydantic import BaseModel, ConfigDict, Field

from micloc.dsp import AudioClip, clip_hash, wav_bytes, write_wav
from micloc.errors import (
    AdapterError,
    AdapterExitError,
    AdapterHTTPError,
    AdapterTimeoutError,
    AdapterTransportError,
    TranscriptDecodeError,
)
from micloc.scoring import MockParams, mock_transcribe, normalize_text, validate_transcript

logger = logging.getLogger(__name__)


class SubprocessAdapterConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["subprocess"]
    command: list[str] = Field(min_length=1)
    timeout: float = Field(default=120.0, gt=0)
    retries: int = Field(default=2, ge=0)
    max_in_flight: int = Field(default=4, ge=1)


class HttpAdapterConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["http"]
    url: str
    timeout: float = Field(default=60.0, gt=0)
    retries: int = Field(default=2, ge=0)
    max_in_flight: int = Field(default=4, ge=1)


class MockAdapterConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["mock"]
    params: MockParams = MockParams()


AdapterConfig = Annotated[
    Union[SubprocessAdapterConfig, HttpAdapterConfig, MockAdapterConfig],
    Field(discriminator="mode"),
]


class Transcriber(Protocol):
    identity: str

    def transcribe(self, clip: AudioClip, reference: Optional[str] = None, distortion: float = 0.0) -> str:
        ...


def decode_transcript(raw: bytes) -> str:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise TranscriptDecodeError(f"Recognizer output is not valid UTF-8: {e}") from e

    if not validate_transcript(text):
        raise TranscriptDecodeError(f"Recognizer output contains control characters: {text[:200]!r}")
    return html.unescape(text)


class _ExternalTranscriber:
    def __init__(self, config, normalize: bool = True):
        self.config = config
        self.normalize = normalize
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def transcribe(self, clip: AudioClip, reference: Optional[str] = None, distortion: float = 0.0) -> str:
        with self._slots:
            text = self._request_with_retries(clip, self.config.retries)
        return normalize_text(text, self.normalize)

    def _request_with_retries(self, clip, retries):
        try:
            return self._request(clip)
        except AdapterError as e:
            if not e.transport or retries <= 0:
                raise
            logger.warning(f"⚠️  {self.identity}: {e}. Retrying ({retries} left)...")
            return self._request_with_retries(clip, retries - 1)

    def _request(self, clip):
        raise NotImplementedError


class SubprocessTranscriber(_ExternalTranscriber):
    @property
    def identity(self) -> str:
        return "subprocess:" + " ".join(self.config.command)

    def _request(self, clip):
        command = list(self.config.command)

        with tempfile.TemporaryDirectory(prefix="micloc-") as tmp:
            wav_path = Path(tmp) / "clip.wav"
            write_wav(clip, wav_path)
            try:
                result = subprocess.run(
                    command + [str(wav_path)],
                    capture_output=True,
                    timeout=self.config.timeout,
                    check=False,
                )
            except subprocess.TimeoutExpired as e:
                raise AdapterTimeoutError(f"Recognizer timed out after {self.config.timeout} s") from e
            except OSError as e:
                raise AdapterExitError(127, f"Could not launch '{command[0]}': {e}") from e

        if result.returncode != 0:
            raise AdapterExitError(result.returncode, result.stderr.decode("utf-8", errors="replace"))

        return decode_transcript(result.stdout)


class HttpTranscriber(_ExternalTranscriber):
    @property
    def identity(self) -> str:
        return "http:" + self.config.url

    def _request(self, clip):
        try:
            response = requests.post(
                self.config.url,
                data=wav_bytes(clip),
                headers={"Content-Type": "audio/wav"},
                timeout=self.config.timeout,
            )
        except requests.exceptions.Timeout as e:
            raise AdapterTimeoutError(f"Recognizer at {self.config.url} timed out after {self.config.timeout} s") from e
        except requests.exceptions.ConnectionError as e:
            raise AdapterTransportError(f"Could not reach recognizer at {self.config.url}: {e}") from e
        except requests.exceptions.RequestException as e:
            raise AdapterTransportError(f"Request to recognizer at {self.config.url} failed: {e}") from e

        if response.status_code != 200:
            raise AdapterHTTPError(response.status_code, response.text)

        return decode_transcript(response.content)


class MockTranscriber:
    def __init__(self, config: MockAdapterConfig, normalize: bool = True):
        self.config = config
        self.normalize = normalize

    @property
    def identity(self) -> str:
        return f"mock:seed={self.config.params.seed}"

    def transcribe(self, clip: AudioClip, reference: Optional[str] = None, distortion: float = 0.0) -> str:
        if reference is None:
            raise AdapterError("The mock recognizer needs the reference transcript")
        text = normalize_text(reference, self.normalize)
        return mock_transcribe(self.config.params, text, distortion, clip_hash(clip))


def build_transcriber(config, normalize: bool = True) -> Transcriber:
    if config.mode == "subprocess":
        return SubprocessTranscriber(config, normalize)
    if config.mode == "http":
        return HttpTranscriber(config, normalize)
    return MockTranscriber(config, normalize)


def transcribe(adapter, clip: AudioClip, reference: Optional[str] = None, distortion: float = 0.0) -> str:
    """Transcript of ``clip`` from an adapter config or an already built transcriber."""
    if isinstance(adapter, BaseModel):
        adapter = build_transcriber(adapter)
    return adapter.transcribe(clip, reference=reference, distortion=distortion)
