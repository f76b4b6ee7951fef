"""Student-t tail probabilities for the split significance test."""
from __future__ import annotations

import math

from scipy.special import betainc


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for T ~ Student-t(df), via the regularized incomplete beta function."""
    if math.isinf(t):
        return 0.0 if t < 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(0.5 * df, 0.5, x))
    return tail if t < 0 else 1.0 - tail


def t_test_p(mean_dl: float, var_dl: float, n: int, two_sided: bool = False) -> float:
    """p-value for H0: the expected per-instance loss change is zero.

    One-sided by default: small p means the loss change is confidently
    negative. Fewer than two observations is inconclusive (p = 1); a zero
    standard deviation gives p = 0 for a negative mean and 1 otherwise.
    """
    if n < 2:
        return 1.0
    s = math.sqrt(max(var_dl, 0.0))
    if s == 0.0:
        return 0.0 if mean_dl < 0 else 1.0
    t = mean_dl / (s / math.sqrt(n))
    cdf = student_t_cdf(t, n - 1)
    if two_sided:
        return min(1.0, 2.0 * min(cdf, 1.0 - cdf))
    return cdf
