"""Welch's t-test and Pearson correlation with Student-t p-values.

The t distribution tail comes from the regularized incomplete beta function,
evaluated with a Lentz continued fraction.
"""

from __future__ import annotations

import math
from typing import Sequence

from ..errors import UndefinedStatisticError, UsageError

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 500) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise UsageError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t > 0 else 1.0 - tail


def _mean_var(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    m = math.fsum(xs) / n
    return m, math.fsum((x - m) ** 2 for x in xs) / (n - 1)


def welch_t_test(a: Sequence[float], b: Sequence[float], tail: str = "two") -> tuple[float, float, float]:
    """Welch's unequal-variance t-test.

    Returns ``(t, df, p)``. ``tail="one"`` tests mean(a) > mean(b).
    """
    if tail not in ("one", "two"):
        raise UsageError("tail must be 'one' or 'two'")
    if len(a) < 2 or len(b) < 2:
        raise UsageError("each sample needs at least two values")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    sa, sb = va / len(a), vb / len(b)
    se2 = sa + sb
    if se2 == 0:
        raise UndefinedStatisticError("both samples have zero variance")
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    if tail == "two":
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    else:
        p = t_sf(t, df)
    return t, df, p


def pearson_r(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample correlation and its two-sided p-value (df = n - 2)."""
    n = len(x)
    if n != len(y):
        raise UsageError("samples must have equal length")
    if n < 3:
        raise UsageError("need at least three pairs")
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxx = math.fsum((v - mx) ** 2 for v in x)
    syy = math.fsum((v - my) ** 2 for v in y)
    if sxx == 0 or syy == 0:
        raise UndefinedStatisticError("correlation undefined for a constant sample")
    sxy = math.fsum((u - mx) * (v - my) for u, v in zip(x, y))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt(df / (1.0 - r * r))
    return r, min(1.0, 2.0 * t_sf(abs(t), df))
