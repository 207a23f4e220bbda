"""Bounded additive noise ``X_{n+1} = T(X_n) + omega`` with ``omega ~ U[-eps, eps]^m``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import MapSystem

__all__ = ["NoiseKernel", "ABSORBED", "transition_density", "sample_step", "sample_steps"]


class _Absorbed:
    """Cemetery state marker."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSORBED"

    def __reduce__(self):
        return (_Absorbed, ())


ABSORBED = _Absorbed()


@dataclass(frozen=True)
class NoiseKernel:
    epsilon: float
    dim: int = 1
    kind: str = "additive-uniform"

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.kind != "additive-uniform":
            raise ValueError(f"unsupported noise kind {self.kind!r}")

    @property
    def box_volume(self) -> float:
        return (2.0 * self.epsilon) ** self.dim


def transition_density(m: MapSystem, kernel: NoiseKernel, x, y) -> float:
    """One-step density of ``y`` given ``x`` (ambient space, before killing).

    Componentwise ``|y - T(x)| <= eps``; on the circle the difference is
    taken modulo 1.
    """
    if kernel.epsilon == 0.0:
        raise ValueError("transition density is singular for epsilon = 0")
    if np.any(m.hole.contains(x)):
        raise ValueError("x lies in the hole")
    diff = np.asarray(y, dtype=float) - np.asarray(m.eval(x), dtype=float)
    if m.state_space.periodic:
        diff = (diff + 0.5) % 1.0 - 0.5
    inside = np.all(np.abs(np.atleast_1d(diff)) <= kernel.epsilon, axis=-1)
    return np.where(inside, 1.0 / kernel.box_volume, 0.0)[()]


def sample_steps(m: MapSystem, kernel: NoiseKernel, x, rng: np.random.Generator):
    """Vectorized step; returns ``(next, alive)``.

    Absorbed entries of ``next`` are NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(m.eval(x), dtype=float)
    if kernel.epsilon > 0.0:
        y = y + rng.uniform(-kernel.epsilon, kernel.epsilon, size=y.shape)
    y = m.state_space.wrap(y)
    alive = m.alive(y)
    if m.dim == 1:
        y = np.where(alive, y, np.nan)
    else:
        y = np.where(alive[..., None], y, np.nan)
    return y, alive


def sample_step(m: MapSystem, kernel: NoiseKernel, x, rng: np.random.Generator):
    """Single draw of ``T(x) + omega``, or :data:`ABSORBED` on hole entry or exit."""
    y, alive = sample_steps(m, kernel, x, rng)
    if not bool(np.all(alive)):
        return ABSORBED
    return float(y) if m.dim == 1 else y
