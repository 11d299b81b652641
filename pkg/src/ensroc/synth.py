"""Synthetic labeled datasets with tunable difficulty."""

from __future__ import annotations

import numpy as np

from .votes import LabeledDataset

GENERATORS = ("two-gaussians", "xor-blobs")


def synth_dataset(generator: str, n: int, d: int, seed: int, **params) -> LabeledDataset:
    """Draw ``n`` labeled points in ``d`` dimensions.

    two-gaussians
        Standard normal features; positives are shifted by
        ``separation / sqrt(d)`` in every coordinate, so the class means are
        ``separation`` apart and the Bayes accuracy is ``Phi(separation / 2)``.
    xor-blobs
        Blobs at ``(+-1, +-1)`` in the first two coordinates with label equal
        to the XOR of the signs, isotropic noise of scale ``noise``; any
        further coordinates are pure noise.

    Labels alternate before shuffling, so both classes are always present
    for ``n >= 2``.
    """
    if generator not in GENERATORS:
        raise ValueError(f"unknown generator {generator!r}; choose from {GENERATORS}")
    if n < 2 or d < 1:
        raise ValueError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), GENERATORS.index(generator)]))
    y = rng.permutation(np.arange(n) % 2).astype(np.int8)
    if generator == "two-gaussians":
        sep = float(params.pop("separation", 1.0))
        x = rng.standard_normal((n, d)) + y[:, None] * (sep / np.sqrt(d))
    else:
        if d < 2:
            raise ValueError("xor-blobs needs d >= 2")
        noise = float(params.pop("noise", 0.5))
        sx = rng.integers(0, 2, n) * 2 - 1
        sy = np.where(y == 1, -sx, sx)
        x = rng.standard_normal((n, d)) * noise
        x[:, 0] += sx
        x[:, 1] += sy
    if params:
        raise ValueError(f"unexpected parameters for {generator}: {sorted(params)}")
    return LabeledDataset(x, y, tuple(f"x{i}" for i in range(d)))
