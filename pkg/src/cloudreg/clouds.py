"""Membership-cloud primitives: parameter bundles, membership curves, and
forward/backward drop generators.

A cloud generalizes a fuzzy membership function: every evaluation may jitter
the curve's widths by a Gaussian of scale ``he`` (the hyper-entropy), so a
concept is represented by a scatter of (x, mu) drops around a base curve
instead of one crisp curve. ``he = 0`` recovers ordinary fuzzy membership.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .rng import RandomSource

ENTROPY_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class TriangleCloud:
    """Asymmetric triangle cloud: peak 1 at ex, support [ex-en1, ex+en2]."""

    ex: float
    en1: float
    en2: float
    he: float = 0.0

    def __post_init__(self):
        if not (self.en1 > 0):
            raise ValueError(f"en1 must be > 0, got {self.en1}")
        if not (self.en2 > 0):
            raise ValueError(f"en2 must be > 0, got {self.en2}")
        if not (self.he >= 0):
            raise ValueError(f"he must be >= 0, got {self.he}")
        if self.he > min(self.en1, self.en2) / 3.0:
            warnings.warn(
                f"he={self.he} exceeds min(en1, en2)/3; width samples will "
                "frequently collapse to the floor",
                stacklevel=3,
            )


@dataclass(frozen=True)
class NormalCloud:
    """Gaussian cloud: bell of width en around ex, jittered by he."""

    ex: float
    en: float
    he: float = 0.0

    def __post_init__(self):
        if not (self.en > 0):
            raise ValueError(f"en must be > 0, got {self.en}")
        if not (self.he >= 0):
            raise ValueError(f"he must be >= 0, got {self.he}")


@dataclass(frozen=True)
class CloudDrop:
    """One stochastic sample (x, mu) emitted by a forward generator."""

    x: float
    mu: float

    def __post_init__(self):
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")


def triangle_membership(c: TriangleCloud, x) -> float | np.ndarray:
    """Base triangle membership of x in c (no entropy jitter).

    Rises linearly from 0 at ex-en1 to 1 at ex, falls linearly to 0 at
    ex+en2, and is 0 outside that support. Accepts scalars or arrays.
    """
    return _triangle_mu(x, c.ex, c.en1, c.en2)


def _triangle_mu(x, ex, en1, en2):
    x = np.asarray(x, dtype=float)
    left = 1.0 + (x - ex) / en1
    right = 1.0 - (x - ex) / en2
    mu = np.where(x < ex, left, right)
    mu = np.where((x < ex - en1) | (x > ex + en2), 0.0, mu)
    if mu.ndim == 0:
        return float(mu)
    return mu


def sample_entropy(en: float, he: float, rng: RandomSource, n: int | None = None):
    """Draw width samples en' ~ N(en, he), floored at 1e-6 * en.

    he = 0 returns en exactly without consuming the stream. Flooring (rather
    than resampling) keeps the number of draws independent of the outcomes.
    """
    if not (en > 0):
        raise ValueError(f"en must be > 0, got {en}")
    if not (he >= 0):
        raise ValueError(f"he must be >= 0, got {he}")
    floor = ENTROPY_FLOOR_FRACTION * en
    if he == 0.0:
        return en if n is None else np.full(n, float(en))
    sampled = rng.normal(en, he, n)
    if n is None:
        return max(float(sampled), floor)
    return np.maximum(sampled, floor)


def forward_drop_arrays(c: TriangleCloud, k: int, rng: RandomSource):
    """Vectorized forward generator: returns (x, mu) arrays of length k.

    Per drop: x' ~ N(ex, (en1+en2)/2), then jittered widths en1', en2' via
    sample_entropy, then mu from the triangle curve with the sampled widths.
    Draws happen in blocks (all x', then all en1', then all en2') so a seed
    pins the whole batch.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = rng.normal(c.ex, 0.5 * (c.en1 + c.en2), k)
    en1 = sample_entropy(c.en1, c.he, rng, k)
    en2 = sample_entropy(c.en2, c.he, rng, k)
    mu = np.where(
        x < c.ex,
        np.maximum(1.0 + (x - c.ex) / en1, 0.0),
        np.maximum(1.0 - (x - c.ex) / en2, 0.0),
    )
    return x, mu


def forward_drops(c: TriangleCloud, k: int, rng: RandomSource) -> list[CloudDrop]:
    """Generate k cloud drops from c."""
    x, mu = forward_drop_arrays(c, k, rng)
    return [CloudDrop(float(xi), float(mi)) for xi, mi in zip(x, mu)]


def backward_mean(drops: list[CloudDrop]) -> float:
    """Mean x of a drop list: the one reverse-cloud statistic control uses."""
    if not drops:
        raise ValueError("backward_mean needs at least one drop")
    return float(np.mean([d.x for d in drops]))


def backward_estimate_normal(drops: list[CloudDrop]) -> tuple[float, float, float]:
    """First-order backward estimator (ex, en, he) assuming Gaussian drops.

    Diagnostic only; the he channel is a known high-variance estimator.
    """
    if len(drops) < 10:
        raise ValueError(f"need at least 10 drops, got {len(drops)}")
    x = np.array([d.x for d in drops])
    ex = float(np.mean(x))
    en = float(math.sqrt(math.pi / 2.0) * np.mean(np.abs(x - ex)))
    var = float(np.var(x, ddof=1))
    he = math.sqrt(max(var - en * en, 0.0))
    return ex, en, he


def normal_membership(c: NormalCloud, x: float, rng: RandomSource | None = None) -> float:
    """Gaussian cloud membership; deterministic when rng is None or he = 0."""
    if rng is None or c.he == 0.0:
        en = c.en
    else:
        en = sample_entropy(c.en, c.he, rng)
    z = (x - c.ex) / en
    return float(np.exp(-0.5 * z * z))


def drops_to_csv(drops: list[CloudDrop]) -> str:
    """Serialize drops as `x,mu` CSV at full double precision."""
    buf = io.StringIO()
    buf.write("x,mu\n")
    for d in drops:
        buf.write(f"{d.x!r},{d.mu!r}\n")
    return buf.getvalue()
