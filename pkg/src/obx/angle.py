"""Two-period embedding of box angles with an aspect-adaptive second period.

An angle is carried by two 2-vectors: ``u1`` has period pi/2 and is always a
unit vector; ``u2`` has period pi and its length shrinks to zero as the box
approaches a square, where the long side stops being defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import canonical_angle

U1_ZERO_NORM = 1e-9


class UndecodableEmbeddingError(ValueError):
    """The period-pi/2 vector is (numerically) zero, so no angle can be read."""


@dataclass(frozen=True)
class ApeConfig:
    lambda_: float = 0.5
    degenerate_norm_eps: float = 1e-3

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError("lambda_ must be positive")
        if not self.degenerate_norm_eps > 0:
            raise ValueError("degenerate_norm_eps must be positive")


@dataclass(frozen=True)
class ApeEmbedding:
    u1: tuple[float, float]
    u2: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([*self.u1, *self.u2])

    @classmethod
    def from_array(cls, values) -> "ApeEmbedding":
        a, b, c, d = (float(v) for v in values)
        return cls((a, b), (c, d))


def aspect_factor(w, h, cfg: ApeConfig = ApeConfig()):
    """``min((w - h) / (lambda * h), 1)``; works elementwise on arrays."""
    return np.minimum((w - h) / (cfg.lambda_ * h), 1.0)


def ape_encode(theta: float, w: float, h: float, cfg: ApeConfig = ApeConfig()) -> ApeEmbedding:
    """Embed the long-side angle of a ``w`` x ``h`` box (``w >= h > 0``)."""
    if not all(math.isfinite(v) for v in (theta, w, h)):
        raise ValueError("non-finite input to ape_encode")
    if not (h > 0 and w >= h):
        raise ValueError(f"ape_encode needs w >= h > 0, got w={w}, h={h}")
    f = min((w - h) / (cfg.lambda_ * h), 1.0)
    return ApeEmbedding(
        (math.cos(4 * theta), math.sin(4 * theta)),
        (math.cos(2 * theta) * f, math.sin(2 * theta) * f),
    )


def ape_encode_array(theta, w, h, cfg: ApeConfig = ApeConfig()) -> np.ndarray:
    """Vectorised :func:`ape_encode`; returns ``(..., 4)`` as (u1x, u1y, u2x, u2y)."""
    theta = np.asarray(theta, dtype=np.float64)
    f = aspect_factor(np.asarray(w, dtype=np.float64), np.asarray(h, dtype=np.float64), cfg)
    return np.stack(
        [np.cos(4 * theta), np.sin(4 * theta), np.cos(2 * theta) * f, np.sin(2 * theta) * f],
        axis=-1,
    )


def _pick(theta90: float, theta180: float) -> float:
    dis = abs((2 * theta90 - 2 * theta180 + math.pi) % (2 * math.pi) - math.pi)
    if dis < 0.5 * math.pi:
        return theta90
    return theta90 + 0.5 * math.pi


def ape_decode(emb: ApeEmbedding, cfg: ApeConfig = ApeConfig()) -> float:
    """Recover the long-side angle in ``[0, pi)`` from an embedding.

    Components are clamped to [-1, 1] first. When ``|u2|`` is below
    ``cfg.degenerate_norm_eps`` the box is treated as square and the
    period-pi/2 estimate is returned alone.
    """
    u1x, u1y = (min(max(float(v), -1.0), 1.0) for v in emb.u1)
    u2x, u2y = (min(max(float(v), -1.0), 1.0) for v in emb.u2)
    if math.hypot(u1x, u1y) < U1_ZERO_NORM:
        raise UndecodableEmbeddingError("u1 is a zero vector")
    theta90 = math.atan2(u1y, u1x) / 4
    if math.hypot(u2x, u2y) < cfg.degenerate_norm_eps:
        return canonical_angle(theta90)
    theta180 = math.atan2(u2y, u2x) / 2
    return canonical_angle(_pick(theta90, theta180))


def ape_decode_array(emb, cfg: ApeConfig = ApeConfig()) -> np.ndarray:
    """Vectorised :func:`ape_decode` over ``(..., 4)``; NaN where undecodable."""
    e = np.clip(np.asarray(emb, dtype=np.float64), -1.0, 1.0)
    u1x, u1y, u2x, u2y = e[..., 0], e[..., 1], e[..., 2], e[..., 3]
    theta90 = np.arctan2(u1y, u1x) / 4
    theta180 = np.arctan2(u2y, u2x) / 2
    dis = np.abs(np.mod(2 * theta90 - 2 * theta180 + np.pi, 2 * np.pi) - np.pi)
    theta = np.where(dis < 0.5 * np.pi, theta90, theta90 + 0.5 * np.pi)
    theta = np.where(np.hypot(u2x, u2y) < cfg.degenerate_norm_eps, theta90, theta)
    theta = np.mod(theta, np.pi)
    theta = np.where(theta >= np.pi, 0.0, theta)
    return np.where(np.hypot(u1x, u1y) < U1_ZERO_NORM, np.nan, theta)


def smooth_l1(z, z_star):
    """0.5 d^2 for ``|d| < 1``, else ``|d| - 0.5``, with ``d = z - z_star``."""
    d = np.abs(np.asarray(z, dtype=np.float64) - np.asarray(z_star, dtype=np.float64))
    out = np.where(d < 1.0, 0.5 * d * d, d - 0.5)
    return float(out) if out.ndim == 0 else out
