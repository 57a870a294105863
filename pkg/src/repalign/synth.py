"""Synthetic embeddings with known ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import EmbeddingSet
from .errors import ArgumentError
from .rng import Xoshiro256

WARPS = ("linear", "tanh-mixed")


@dataclass(frozen=True)
class SharedLatentSpec:
    n: int
    d_latent: int
    d1: int
    d2: int
    noise_sigma: float = 0.0
    warp: str = "linear"
    seed: int = 0


def shared_latent_views(n: int, d_latent: int, dims: Sequence[int], noise_sigmas: Sequence[float],
                        warp: str = "linear", seed: int = 0,
                        names: Optional[Sequence[str]] = None) -> list:
    """Several noisy views of one Gaussian latent cloud.

    Each view maps the latent through its own random Gaussian matrix
    (optionally followed by ``tanh`` and a second random mixing) and adds
    independent noise of its own scale. Draw order from the seeded stream:
    latent, then per view map, [mixing], noise.
    """
    if warp not in WARPS:
        raise ArgumentError(f"warp must be one of {WARPS}, got {warp!r}")
    if n < 1 or d_latent < 1 or any(d < 1 for d in dims):
        raise ArgumentError("n, d_latent and every view dimension must be >= 1")
    if warp == "linear" and any(d < d_latent for d in dims):
        raise ArgumentError("linear views need dim >= d_latent to stay injective")
    if len(noise_sigmas) != len(dims) or any(s < 0 for s in noise_sigmas):
        raise ArgumentError("need one non-negative noise scale per view")
    names = list(names) if names is not None else [f"view{i}" for i in range(len(dims))]
    gen = Xoshiro256(seed)
    z = gen.normal((n, d_latent))
    views = []
    for name, d, sigma in zip(names, dims, noise_sigmas):
        h = z @ (gen.normal((d_latent, d)) / np.sqrt(d_latent))
        if warp == "tanh-mixed":
            h = np.tanh(h) @ (gen.normal((d, d)) / np.sqrt(d))
        noise = gen.normal((n, d))
        views.append(EmbeddingSet(name, h + sigma * noise))
    return views


def shared_latent_pair(spec: SharedLatentSpec) -> tuple:
    f, g = shared_latent_views(spec.n, spec.d_latent, [spec.d1, spec.d2],
                               [spec.noise_sigma, spec.noise_sigma], spec.warp, spec.seed, ["f", "g"])
    return f, g


def random_baseline(n: int, d: int, seed: int, name: str = "random-baseline") -> EmbeddingSet:
    """I.i.d. standard normal embeddings flagged as a baseline."""
    if n < 1 or d < 1:
        raise ArgumentError("n and d must be >= 1")
    return EmbeddingSet(name, Xoshiro256(seed).normal((n, d)), baseline=True)


def uniform_manifold(kind: str, n: int, seed: int, ambient: Optional[int] = None) -> tuple:
    """Uniform samples of simple manifolds: ``(points, true_dimension)``.

    ``line`` is a unit segment in ``ambient`` (default 3) dims, ``disk`` the
    unit 2-disk, ``cube<d>`` the unit d-cube (e.g. ``cube5``).
    """
    gen = Xoshiro256(seed)
    if kind == "line":
        t = gen.uniform((n, 1))
        direction = gen.normal((1, ambient or 3))
        return t @ (direction / np.linalg.norm(direction)), 1
    if kind == "disk":
        u = gen.uniform((n, 2))
        r, theta = np.sqrt(u[:, 0]), 2 * np.pi * u[:, 1]
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)]), 2
    if kind.startswith("cube"):
        d = int(kind[4:])
        return gen.uniform((n, d)), d
    raise ArgumentError(f"unknown manifold {kind!r}")
