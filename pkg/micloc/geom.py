"""Positions, radial distances and Monte-Carlo candidate generation.

Candidates are drawn from a Gaussian centred on the nominal microphone with a
standard deviation of gamma per axis and kept only if they fall inside the
gamma-ball around it. Every draw comes from an explicit ``numpy`` Generator so
that a master seed fixes the sampled set regardless of evaluation order.
"""
from __future__ import annotations

import hashlib
import math
from typing import Iterable, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from micloc.errors import ConstraintError, SamplingError

MAX_CONSECUTIVE_REJECTIONS = 10_000

RandomStream = np.random.Generator

_Shelled = TypeVar("_Shelled")


class Position3D(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Position3D":
        return cls(x=float(values[0]), y=float(values[1]), z=float(values[2]))

    def __str__(self):
        return f"({self.x:.4f}, {self.y:.4f}, {self.z:.4f})"


class BallConstraint(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    center: Position3D
    radius: float = Field(gt=0, description="Gamma, the radius of the ball in meters")


def _stream_key(key) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool) and key >= 0:
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_stream(master_seed: int, *keys) -> RandomStream:
    """Independent substream for ``keys`` under ``master_seed``.

    Keys may be non-negative integers or any value with a stable ``str``
    (utterance ids, labels). Equal arguments always give equal streams.
    """
    entropy = [_stream_key(master_seed)] + [_stream_key(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def radial_distance(p: Position3D, q: Position3D) -> float:
    return math.dist((p.x, p.y, p.z), (q.x, q.y, q.z))


def gen_candidate(ball: BallConstraint, rng: RandomStream, max_rejections: int = MAX_CONSECUTIVE_REJECTIONS) -> Position3D:
    """Draw ``center + N(0, gamma^2 I)`` until the point lies inside the ball."""
    center = ball.center.as_array()

    for _ in range(max_rejections):
        offset = rng.normal(0.0, ball.radius, size=3)
        candidate = Position3D.from_array(center + offset)
        if radial_distance(candidate, ball.center) <= ball.radius:
            return candidate

    raise SamplingError(
        f"{max_rejections} consecutive draws fell outside the ball of radius {ball.radius} around {ball.center}"
    )


def gen_on_sphere(center: Position3D, radius: float, rng: RandomStream) -> Position3D:
    """Uniform point on the sphere of exactly ``radius`` around ``center``."""
    if not radius > 0:
        raise ConstraintError(f"Sphere radius must be positive, got {radius}")

    while True:
        direction = rng.standard_normal(3)
        norm = float(np.linalg.norm(direction))
        # zero-norm directions cannot be normalized
        if norm > 1e-12:
            break

    return Position3D.from_array(center.as_array() + radius * direction / norm)


def filter_by_shell(candidates: Iterable[_Shelled], target_radius: float, tolerance: float) -> list[_Shelled]:
    """Candidates whose ``radial_distance`` lies within ``target_radius ± tolerance``."""
    if tolerance < 0:
        raise ConstraintError(f"Shell tolerance must be non-negative, got {tolerance}")

    low = target_radius - tolerance
    high = target_radius + tolerance
    return [c for c in candidates if low <= c.radial_distance <= high]


def is_inside(room, p: Position3D, margin: float = 0.0) -> bool:
    """Strict interior test against a rectangular room anchored at the origin."""
    return (
        margin < p.x < room.length - margin
        and margin < p.y < room.width - margin
        and margin < p.z < room.height - margin
    )


def distance_to_nearest_wall(room, p: Position3D) -> float:
    return min(p.x, room.length - p.x, p.y, room.width - p.y, p.z, room.height - p.z)
