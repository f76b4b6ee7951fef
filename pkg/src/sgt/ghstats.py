"""Running first and second moments of (gradient, Hessian) observations.

Moments are kept in Welford form (means plus sums of squared deviations) so
that long streams do not lose precision, and two accumulators can be combined
with the pairwise update of Chan et al. / Bennett et al.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class GradHessPair:
    """First and second derivative of a loss w.r.t. one raw score."""

    g: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.g) and math.isfinite(self.h)):
            raise ValueError(f"non-finite gradient/Hessian pair ({self.g}, {self.h})")


@dataclass(slots=True)
class GradHessStats:
    n: int = 0
    mean_g: float = 0.0
    mean_h: float = 0.0
    m2_g: float = 0.0
    m2_h: float = 0.0
    c_gh: float = 0.0

    def observe(self, g: float, h: float) -> GradHessStats:
        """Fold one observation into the accumulator (in place) and return it."""
        if not (math.isfinite(g) and math.isfinite(h)):
            raise ValueError(f"non-finite gradient/Hessian pair ({g}, {h})")
        self.n += 1
        dg = g - self.mean_g
        dh = h - self.mean_h
        self.mean_g += dg / self.n
        self.mean_h += dh / self.n
        self.m2_g += dg * (g - self.mean_g)
        self.m2_h += dh * (h - self.mean_h)
        self.c_gh += dg * (h - self.mean_h)
        return self

    def observe_pair(self, pair: GradHessPair) -> GradHessStats:
        return self.observe(pair.g, pair.h)

    def merge(self, other: GradHessStats) -> GradHessStats:
        """Return a new accumulator equivalent to observing both streams."""
        if other.n == 0:
            return self.copy()
        if self.n == 0:
            return other.copy()
        n = self.n + other.n
        dg = other.mean_g - self.mean_g
        dh = other.mean_h - self.mean_h
        w = self.n * other.n / n
        return GradHessStats(
            n=n,
            mean_g=self.mean_g + dg * other.n / n,
            mean_h=self.mean_h + dh * other.n / n,
            m2_g=self.m2_g + other.m2_g + dg * dg * w,
            m2_h=self.m2_h + other.m2_h + dh * dh * w,
            c_gh=self.c_gh + other.c_gh + dg * dh * w,
        )

    __add__ = merge

    def copy(self) -> GradHessStats:
        return GradHessStats(self.n, self.mean_g, self.mean_h, self.m2_g, self.m2_h, self.c_gh)

    @property
    def sum_g(self) -> float:
        return self.n * self.mean_g

    @property
    def sum_h(self) -> float:
        return self.n * self.mean_h

    # Sample (n - 1) moments; zero when fewer than two observations.
    @property
    def var_g(self) -> float:
        return self.m2_g / (self.n - 1) if self.n >= 2 else 0.0

    @property
    def var_h(self) -> float:
        return self.m2_h / (self.n - 1) if self.n >= 2 else 0.0

    @property
    def cov_gh(self) -> float:
        return self.c_gh / (self.n - 1) if self.n >= 2 else 0.0

    def delta_loss_m2(self, v: float) -> float:
        """Sum of squared deviations of g*v + h*v^2/2 over the observations."""
        m2 = v * v * self.m2_g + 0.25 * v ** 4 * self.m2_h + v ** 3 * self.c_gh
        return max(m2, 0.0)

    def delta_loss_moments(self, v: float) -> tuple[float, float]:
        """Mean and sample variance of the per-instance loss change for a step of v.

        v is treated as a constant, so Var(gv + hv^2/2) expands into the
        gradient and Hessian (co)variances. The variance is 0 for n < 2.
        """
        if self.n == 0:
            return 0.0, 0.0
        mean = self.mean_g * v + 0.5 * self.mean_h * v * v
        if self.n < 2:
            return mean, 0.0
        return mean, self.delta_loss_m2(v) / (self.n - 1)


def observe(stats: GradHessStats, obs: GradHessPair) -> GradHessStats:
    return stats.copy().observe(obs.g, obs.h)


def merge(a: GradHessStats, b: GradHessStats) -> GradHessStats:
    return a.merge(b)


def delta_loss_moments(stats: GradHessStats, v: float) -> tuple[float, float]:
    return stats.delta_loss_moments(v)
