"""Hemisphere probabilities for uniform points and the regime of K_a = beta*n."""

import enum
import math
from dataclasses import dataclass

from .errors import ParameterError

EXACT_MAX_POINTS = 64


def wendel_count(n, N):
    """Numerator and denominator of the hemisphere probability as integers.

    Returns ``(sum_{i<n} C(N-1, i), 2**(N-1))`` without reducing the fraction.
    """
    _check(n, N)
    return sum(math.comb(N - 1, i) for i in range(min(n, N))), 1 << (N - 1)


def _check(n, N):
    if n < 1 or N < 1:
        raise ParameterError(f"need n >= 1 and N >= 1, got n={n}, N={N}")


def _log_binom_terms(m, lo, hi):
    """log C(m, i) - m log 2 for i in [lo, hi)."""
    base = math.lgamma(m + 1) - m * math.log(2.0)
    return [base - math.lgamma(i + 1) - math.lgamma(m - i + 1) for i in range(lo, hi)]


def _log_sum_exp(logs):
    top = max(logs)
    # ascending-order compensated sum of the scaled terms
    return top + math.log(math.fsum(math.exp(v - top) for v in logs))


def log_wendel_probability(n, N):
    """log p_{n,N} by log-domain accumulation (any N)."""
    _check(n, N)
    if N <= n:
        return 0.0
    return _log_sum_exp(_log_binom_terms(N - 1, 0, n))


def log_wendel_tail(n, N):
    """log(1 - p_{n,N}) = log P[Bin(N-1, 1/2) >= n], accurate deep in the tail."""
    _check(n, N)
    if N <= n:
        return -math.inf
    return _log_sum_exp(_log_binom_terms(N - 1, n, N))


def wendel_probability(n, N):
    """Probability that N uniform points on the (n-1)-sphere share a hemisphere."""
    _check(n, N)
    if N <= n:
        return 1.0
    if N <= EXACT_MAX_POINTS:
        num, den = wendel_count(n, N)
        return num / den
    # the smaller of p and 1-p is accurate in log-domain; derive the other from it
    head = log_wendel_probability(n, N)
    if head < math.log(0.5):
        return math.exp(head)
    return -math.expm1(log_wendel_tail(n, N))


def binary_divergence(x):
    """D(x || 1/2) in nats, with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"x must lie in [0, 1], got {x}")
    total = 0.0
    if x > 0:
        total += x * math.log(2 * x)
    if x < 1:
        total += (1 - x) * math.log(2 * (1 - x))
    return total


def hemispherical_rate(beta):
    """Exponential rate of 1 - p_{n, beta n} for 1 < beta < 2."""
    if not 1.0 < beta < 2.0:
        raise ParameterError(f"the rate exists only for 1 < beta < 2, got {beta}")
    return beta * binary_divergence(1.0 / beta)


class Regime(enum.Enum):
    ALWAYS_ONE = "AlwaysOne"
    EXPONENTIAL_TO_ONE = "ExponentialToOne"
    HALF = "Half"
    TO_ZERO = "ToZero"


@dataclass(frozen=True)
class RegimeClass:
    kind: Regime
    rate: float | None = None

    def __post_init__(self):
        if (self.rate is not None) != (self.kind is Regime.EXPONENTIAL_TO_ONE):
            raise ParameterError("rate is defined only in the ExponentialToOne regime")


def classify_regime(beta):
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if beta <= 1:
        return RegimeClass(Regime.ALWAYS_ONE)
    if beta < 2:
        return RegimeClass(Regime.EXPONENTIAL_TO_ONE, hemispherical_rate(beta))
    if beta == 2:
        return RegimeClass(Regime.HALF)
    return RegimeClass(Regime.TO_ZERO)
