"""Seeded random streams and mergeable streaming moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_nonneg_int, check_seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *key)``.

    Philox keyed through a ``SeedSequence`` spawn key, so each key tuple is an
    independent, reproducible stream regardless of scheduling.
    """
    seed = check_seed(seed)
    key = tuple(check_nonneg_int(k, "stream key") for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class RunningMoments:
    """Count, mean and central moment sums M2..M4, mergeable in any fixed order.

    Updates follow Welford / Chan et al.; ``merge`` is exact algebra so an
    ordered reduction over blocks is deterministic.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_array(cls, x) -> "RunningMoments":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mean = float(x.mean())
        d = x - mean
        d2 = d * d
        return cls(int(x.size), mean, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def push(self, x: float) -> None:
        self.merge(RunningMoments(1, float(x)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2, self.m3, self.m4 = other.n, other.mean, other.m2, other.m3, other.m4
            return self
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (self.m3 + other.m3 + delta * d_n * d_n * na * nb * (na - nb)
              + 3.0 * d_n * (na * other.m2 - nb * self.m2))
        m4 = (self.m4 + other.m4
              + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
              + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
              + 4.0 * d_n * (na * other.m3 - nb * self.m3))
        self.n, self.mean, self.m2, self.m3, self.m4 = n, self.mean + d_n * nb, m2, m3, m4
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan

    @property
    def stderr_mean(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 1 else math.nan

    @property
    def stderr_variance(self) -> float:
        """Large-sample standard error of the sample variance, from mu4."""
        if self.n < 2:
            return math.nan
        mu2 = self.m2 / self.n
        mu4 = self.m4 / self.n
        return math.sqrt(max(mu4 - mu2 * mu2 * (self.n - 3) / (self.n - 1), 0.0) / self.n)
