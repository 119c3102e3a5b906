"""Closed-form limits, pairwise error bounds and the E_l error-term ladder."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import seeding
from .channel import derive_sizes
from .errors import ParameterError
from .sphere import sample_sphere_rows


def _nonneg(name, value):
    if not value >= 0:
        raise ParameterError(f"{name} must be non-negative, got {value}")


def _pos(name, value):
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")


def alignment_limit(beta):
    """Limit of <u, Y/|Y|> for a hemispherical active set: sqrt(2b / (2b + pi))."""
    _nonneg("beta", beta)
    return math.sqrt(2 * beta / (2 * beta + math.pi))


def retention_limit_at_zero(beta):
    """(retention, pre-filter PUPE) limits for the plain hemisphere filter (tau = 0)."""
    retention = 0.5 + math.asin(alignment_limit(beta)) / math.pi
    return retention, 1.0 - retention


def component_limits(beta, P):
    """Limits of S_par/n, |S_perp|^2/n^2 and |Y|/n."""
    _pos("beta", beta)
    _pos("P", P)
    parallel = beta * math.sqrt(2 * P / math.pi)
    perp_sq = P * beta
    return parallel, perp_sq, math.sqrt(parallel ** 2 + perp_sq)


def ml_error_exponent(P):
    _pos("P", P)
    return P / 4


@dataclass(frozen=True)
class LimitReport:
    beta: float
    P: float
    c: float
    retention_at_zero: float
    pupe_prefilter_at_zero: float
    parallel_limit: float
    perp_sq_limit: float
    output_norm_limit: float
    ml_exponent: float

    def as_dict(self):
        return asdict(self)


def limit_report(beta, P):
    retention, pupe = retention_limit_at_zero(beta)
    parallel, perp_sq, norm = component_limits(beta, P)
    return LimitReport(beta, P, alignment_limit(beta), retention, pupe,
                       parallel, perp_sq, norm, ml_error_exponent(P))


def gaussian_q(x):
    """Standard normal upper tail, via erfc."""
    return 0.5 * math.erfc(x / math.sqrt(2))


def pairwise_error(delta_norm_sq):
    """(Q(|Delta|/2), exp(-|Delta|^2/8)) for a pairwise confusion with difference Delta."""
    _nonneg("delta_norm_sq", delta_norm_sq)
    return gaussian_q(math.sqrt(delta_norm_sq) / 2), math.exp(-delta_norm_sq / 8)


def delta_norms_sq(n, P, l, trials, seed):
    """|Delta|^2 samples, Delta = (sum of l codewords) - (sum of l other codewords)."""
    if l < 1 or trials < 1:
        raise ParameterError("need l >= 1 and trials >= 1")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    _pos("P", P)
    rng = seeding.make_rng(seed, seeding.DELTA)
    out = np.empty(trials)
    for t in range(trials):
        x = sample_sphere_rows(rng, 2 * l, n, math.sqrt(n * P))
        delta = x[:l].sum(axis=0) - x[l:].sum(axis=0)
        out[t] = delta @ delta
    return out


def delta_concentration_check(n, P, l, trials, seed):
    """Sample mean of |Delta_{l,n}|^2 / n (tends to 2 l P)."""
    return float(delta_norms_sq(n, P, l, trials, seed).mean() / n)


def log_binom(m, k):
    if k < 0 or k > m:
        return -math.inf
    return math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)


def error_term_log(n, d, beta, P, l):
    """log E_l = log C(K_a-1, l-1) + log C(round((M-K_a)/2), l) - l n P / 4.

    The o(n) correction in the exponent is taken as zero.
    """
    M, K_a = derive_sizes(n, d, beta)
    _pos("P", P)
    if not 1 <= l <= K_a:
        raise ParameterError(f"l must lie in [1, K_a={K_a}], got {l}")
    unsent_in_cap = int(round((M - K_a) / 2))
    return log_binom(K_a - 1, l - 1) + log_binom(unsent_in_cap, l) - l * n * P / 4


def error_term_ladder(n, d, beta, P):
    """log E_l for l = 1..K_a."""
    K_a = derive_sizes(n, d, beta)[1]
    return np.array([error_term_log(n, d, beta, P, l) for l in range(1, K_a + 1)])


def exponent_estimate(n, d, beta, P):
    """-log(E_1)/n, the finite-n proxy for the P/4 exponent."""
    return -error_term_log(n, d, beta, P, 1) / n


def sum_rate_feasibility(n, d, beta, P):
    """(R_sum, C_sum, R_sum <= C_sum) in nats; ``n`` may be any real > 1."""
    if not n > 1:
        raise ParameterError(f"n must exceed 1, got {n}")
    _pos("beta", beta)
    _pos("P", P)
    r_sum = beta * d * math.log(n)
    c_sum = 0.5 * math.log1p(n * beta * P)
    return r_sum, c_sum, r_sum <= c_sum
