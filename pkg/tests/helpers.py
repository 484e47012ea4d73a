"""Shared generators for the test suite."""

import numpy as np

from cellwave.geometry import ShapeCoeffs


def random_shape(rng, truncation=6, budget=0.6, fold=1):
    """Random real shape with ball norm ``budget * U(0.2, 1)``."""
    modes = [n for n in range(2, truncation + 1) if n % fold == 0]
    a = np.zeros(truncation + 1)
    a[modes] = rng.uniform(-1, 1, len(modes))
    mu = rng.uniform(-1, 1)
    weight = abs(mu) + np.sum((np.arange(truncation + 1) + 1) * np.abs(a))
    scale = budget * rng.uniform(0.2, 1.0) / weight
    return ShapeCoeffs(mu * scale, a * scale, fold)
