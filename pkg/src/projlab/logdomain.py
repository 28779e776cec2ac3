"""Stable arithmetic for powers with very large integer exponents.

Spectral data in this package frequently takes the form lam = 1 - exp(L)
with L a (possibly hugely negative) log-defect, raised to integer powers
far beyond 2**53.  Everything here works in log space so that neither the
defect nor the exponent ever has to round through a plain float64 product.
"""

from __future__ import annotations

import math

# exp underflows to 0.0 below this; used to route around lost precision
_EXP_UNDERFLOW = -745.0


def log_int(n: int) -> float:
    """Natural log of a positive integer of any size."""
    if n <= 0:
        raise ValueError("log_int needs a positive integer")
    return math.log(n)


def exp_int(x: float, pad: float = 0.0) -> int:
    """An integer close to exp(x + pad), exact-by-construction for huge x."""
    y = x + pad
    if y < 0:
        return 1
    if y < 700.0:
        return max(1, math.ceil(math.exp(y)))
    d = y / math.log(10.0)
    whole = int(d)
    frac = d - whole
    mantissa = int(math.ceil(10 ** (frac + 14)))
    return mantissa * 10 ** (whole - 14)


def neglog_from_defect_log(L: float) -> float:
    """Return -ln(1 - exp(L)) ... the decay rate of lam = 1 - exp(L)."""
    if L >= 0.0:
        return math.inf
    if L < -38.0:
        # 1 - exp(L) == exp(L) * (1 + exp(L)/2 + ...) to beyond double precision
        return math.exp(L)
    return -math.log1p(-math.exp(L))


def log_neglog_from_defect_log(L: float) -> float:
    """ln(-ln(1 - exp(L))), stable for arbitrarily negative L."""
    if L >= 0.0:
        return math.inf
    if L < -38.0:
        return L
    return math.log(-math.log1p(-math.exp(L)))


def defect_power(L: float, n: int) -> tuple[float, float]:
    """(lam**n, 1 - lam**n) for lam = 1 - exp(L), exact through log space.

    Both returned values carry full relative precision in their small
    regime: the first is accurate when lam**n is small, the second when
    1 - lam**n is small.
    """
    if n < 1:
        raise ValueError("exponent must be >= 1")
    if L == -math.inf:
        return 1.0, 0.0
    a = log_neglog_from_defect_log(L)
    t_log = log_int(n) + a
    if t_log > 6.5:  # t > ~665: lam**n underflows regardless
        return 0.0, 1.0
    t = math.exp(t_log)
    if t > -_EXP_UNDERFLOW:
        return 0.0, 1.0
    p = math.exp(-t)
    return p, -math.expm1(-t)


def float_power(lam: float, n: int) -> tuple[float, float]:
    """(lam**n, 1 - lam**n) for a plain float lam in [0, 1]."""
    if n < 1:
        raise ValueError("exponent must be >= 1")
    if lam <= 0.0:
        return (1.0, 0.0) if lam == 1.0 else (0.0, 1.0)
    if lam >= 1.0:
        return 1.0, 0.0
    # route through the defect form so lam very close to 1 keeps precision
    d = 1.0 - lam
    L = math.log(d)
    return defect_power(L, n)


def signed_power(lam: float, n: int) -> float:
    """lam**n for lam in [-1, 1] and any positive integer n."""
    mag, _ = float_power(abs(lam), n)
    if lam < 0.0 and n % 2 == 1:
        return -mag
    return mag


def multiplicative_scan(start: int, cap: int):
    """Yield the exponent scan start, then p -> max(p+1, ceil(1.1 p)) up to cap."""
    p = max(1, start)
    while p <= cap:
        yield p
        p = max(p + 1, p + (p + 9) // 10)
