"""Room impulse responses of rectangular rooms by the image-source method.

Walls are ordered ``(x=0, x=length, y=0, y=width, z=0, z=height)``; one
reflection coefficient per wall. Each image source contributes an impulse of
amplitude ``prod(beta^reflections) / (4 pi d)`` at delay ``d / c``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
import soundfile as sf
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from micloc.errors import ConfigurationError, ConstraintError, DegenerateGeometryError
from micloc.geom import Position3D, is_inside, radial_distance

logger = logging.getLogger(__name__)

SABINE_CONSTANT = 0.161
DEFAULT_RT60 = 0.3
SINC_HALF_WIDTH = 8
_SINC_CHUNK = 65_536


class RoomSpec(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    length: float = Field(gt=0, description="Extent along x in meters")
    width: float = Field(gt=0, description="Extent along y in meters")
    height: float = Field(gt=0, description="Extent along z in meters")
    reflection_coefficients: Optional[tuple[float, float, float, float, float, float]] = Field(
        default=None, description="One coefficient per wall: x=0, x=length, y=0, y=width, z=0, z=height"
    )
    rt60: Optional[float] = Field(default=None, gt=0, description="Reverberation time in seconds, used when no coefficients are given")
    sample_rate: int = Field(default=16000, gt=0)
    rir_length: float = Field(default=0.5, gt=0, description="Length of the synthesized response in seconds")
    max_image_order: Union[Literal["auto"], int] = "auto"
    sound_speed: float = Field(default=343.0, gt=0)
    interpolation: Literal["nearest", "sinc"] = "nearest"
    prune_threshold: float = Field(default=1e-6, ge=0, description="Images quieter than this fraction of the direct path are dropped")

    @field_validator("reflection_coefficients")
    @classmethod
    def _check_coefficients(cls, value):
        if value is not None and any(not 0.0 <= b < 1.0 for b in value):
            raise ValueError(f"reflection coefficients must lie in [0, 1), got {value}")
        return value

    @field_validator("max_image_order")
    @classmethod
    def _check_order(cls, value):
        if value != "auto" and value < 0:
            raise ValueError("max_image_order must be 'auto' or a non-negative integer")
        return value

    @model_validator(mode="before")
    @classmethod
    def _default_rt60(cls, data):
        if isinstance(data, dict) and data.get("reflection_coefficients") is None and data.get("rt60") is None:
            data = {**data, "rt60": DEFAULT_RT60}
        return data

    @model_validator(mode="after")
    def _one_absorption_source(self):
        if self.reflection_coefficients is not None and self.rt60 is not None:
            raise ValueError("give either reflection_coefficients or rt60, not both")
        return self

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height

    @property
    def surface(self) -> float:
        return 2 * (self.length * self.width + self.length * self.height + self.width * self.height)

    @property
    def wall_areas(self) -> tuple[float, ...]:
        yz = self.width * self.height
        xz = self.length * self.height
        xy = self.length * self.width
        return (yz, yz, xz, xz, xy, xy)

    def wall_reflections(self) -> tuple[float, ...]:
        if self.reflection_coefficients is not None:
            return tuple(self.reflection_coefficients)
        return rt60_to_reflection(self, self.rt60)

    def resolved_max_order(self) -> int:
        if self.max_image_order == "auto":
            shortest = min(self.length, self.width, self.height)
            return math.ceil(self.sound_speed * self.rir_length / shortest) + 1
        return int(self.max_image_order)


@dataclass(frozen=True)
class Rir:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("an impulse response needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("impulse response contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples ** 2))


def rt60_to_reflection(room: RoomSpec, rt60: float) -> tuple[float, ...]:
    """Uniform wall reflection coefficients from Sabine's formula."""
    if not rt60 > 0:
        raise ConfigurationError(f"RT60 must be positive, got {rt60}")

    absorption = SABINE_CONSTANT * room.volume / (room.surface * rt60)
    if absorption > 1.0:
        minimum_rt60 = SABINE_CONSTANT * room.volume / room.surface
        raise ConfigurationError(
            f"RT60 of {rt60} s needs an absorption of {absorption:.3f} > 1; "
            f"the minimum achievable RT60 for this room is {minimum_rt60:.4f} s"
        )

    return (math.sqrt(1.0 - absorption),) * 6


def sabine_rt60(room: RoomSpec, reflection_coefficients) -> float:
    absorbing_area = sum(area * (1.0 - beta ** 2) for area, beta in zip(room.wall_areas, reflection_coefficients))
    if absorbing_area <= 0:
        return math.inf
    return SABINE_CONSTANT * room.volume / absorbing_area


def _axis_images(size, source, mic, beta_low, beta_high, max_order, reach):
    # Image coordinate along one axis is (1 - 2q) * s + 2 m L; the low wall is hit |m - q| times, the high wall |m| times.
    n = min(max_order, math.ceil(reach / (2 * size)) + 1)
    m, q = np.meshgrid(np.arange(-n, n + 1), np.array([0, 1]), indexing="ij")
    m = m.ravel()
    q = q.ravel()
    offset = (1 - 2 * q) * source + 2 * m * size - mic
    gain = beta_low ** np.abs(m - q) * beta_high ** np.abs(m)
    order = np.abs(2 * m - q)
    return offset, gain, order


def compute_rir(room: RoomSpec, source: Position3D, mic: Position3D) -> Rir:
    for label, point in (("source", source), ("microphone", mic)):
        if not is_inside(room, point):
            raise ConstraintError(f"The {label} at {point} is not strictly inside the {room.length} x {room.width} x {room.height} room")

    direct_distance = radial_distance(source, mic)
    if direct_distance < 1e-9:
        raise DegenerateGeometryError(f"Source and microphone coincide at {source}")

    fs = room.sample_rate
    c = room.sound_speed
    n_samples = int(round(room.rir_length * fs))
    samples_per_meter = fs / c

    if round(direct_distance * samples_per_meter) >= n_samples:
        raise ConfigurationError(
            f"rir_length of {room.rir_length} s is shorter than the direct path delay ({direct_distance / c:.4f} s)"
        )

    max_order = room.resolved_max_order()
    beta = room.wall_reflections()
    reach = (n_samples + SINC_HALF_WIDTH) / samples_per_meter

    ox, gx, kx = _axis_images(room.length, source.x, mic.x, beta[0], beta[1], max_order, reach)
    oy, gy, ky = _axis_images(room.width, source.y, mic.y, beta[2], beta[3], max_order, reach)
    oz, gz, kz = _axis_images(room.height, source.z, mic.z, beta[4], beta[5], max_order, reach)

    distance = np.sqrt(ox[:, None, None] ** 2 + oy[None, :, None] ** 2 + oz[None, None, :] ** 2)
    gain = gx[:, None, None] * gy[None, :, None] * gz[None, None, :]
    order = kx[:, None, None] + ky[None, :, None] + kz[None, None, :]

    amplitude = gain / (4 * np.pi * distance)
    delay = distance * samples_per_meter

    direct_amplitude = 1.0 / (4 * np.pi * direct_distance)
    keep = (order <= max_order) & (amplitude > 0) & (amplitude >= room.prune_threshold * direct_amplitude)
    if room.interpolation == "nearest":
        keep &= np.rint(delay) < n_samples
    else:
        keep &= delay < n_samples + SINC_HALF_WIDTH

    delay = delay[keep]
    amplitude = amplitude[keep]

    if room.interpolation == "nearest":
        h = np.bincount(np.rint(delay).astype(np.int64), weights=amplitude, minlength=n_samples)[:n_samples]
    else:
        h = _place_windowed_sinc(delay, amplitude, n_samples)

    logger.debug(f"RIR for mic {mic}: {delay.size} images, order <= {max_order}")
    return Rir(samples=h, sample_rate=fs)


def _place_windowed_sinc(delay, amplitude, n_samples):
    h = np.zeros(n_samples)
    taps = np.arange(-SINC_HALF_WIDTH + 1, SINC_HALF_WIDTH + 1)

    for start in range(0, delay.size, _SINC_CHUNK):
        t = delay[start:start + _SINC_CHUNK, None]
        a = amplitude[start:start + _SINC_CHUNK, None]
        index = np.floor(t).astype(np.int64) + taps[None, :]
        x = index - t
        # Hann window spanning +-SINC_HALF_WIDTH samples
        window = 0.5 * (1 + np.cos(np.pi * x / SINC_HALF_WIDTH))
        values = a * np.sinc(x) * window
        valid = (index >= 0) & (index < n_samples)
        h += np.bincount(index[valid], weights=values[valid], minlength=n_samples)[:n_samples]

    return h


def schroeder_decay(rir: Rir) -> np.ndarray:
    """Backward-integrated energy in dB relative to the total energy."""
    energy = np.cumsum(rir.samples[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        return np.zeros_like(energy)
    return 10 * np.log10(np.maximum(energy, np.finfo(float).tiny) / energy[0])


def write_rir_wav(rir: Rir, path: Path):
    sf.write(str(path), rir.samples.astype(np.float32), rir.sample_rate, subtype="FLOAT")


def write_rir_csv(rir: Rir, path: Path):
    pd.DataFrame({"index": np.arange(len(rir)), "amplitude": rir.samples}).to_csv(path, index=False)
