"""Two-stage decoder: cap pre-filter around Y/|Y|, then ML over the retained codewords."""

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, ParameterError

DEFAULT_ENUMERATION_CAP = 50_000_000
PAIR_BLOCK_ROWS = 512


class TauKind(enum.Enum):
    ZERO = "zero"
    POWER_LAW = "power"
    LOG_GROWTH = "log"


@dataclass(frozen=True)
class TauSchedule:
    """Cap threshold tau_n = -a_n / sqrt(n) with a_n = n**gamma or scale*log(n)."""

    kind: TauKind = TauKind.POWER_LAW
    value: float = 0.25

    def __post_init__(self):
        if self.kind is TauKind.POWER_LAW and not 0 < self.value < 0.5:
            raise ParameterError(f"power-law exponent must lie in (0, 1/2), got {self.value}")
        if self.kind is TauKind.LOG_GROWTH and not self.value > 0:
            raise ParameterError(f"log-growth scale must be positive, got {self.value}")

    @classmethod
    def zero(cls):
        return cls(TauKind.ZERO, 0.0)

    @classmethod
    def parse(cls, text):
        """Parse ``zero``, ``power:GAMMA`` or ``log:SCALE``."""
        name, _, arg = text.strip().partition(":")
        try:
            kind = TauKind(name)
        except ValueError:
            raise ParameterError(f"unknown tau schedule {text!r}") from None
        if kind is TauKind.ZERO:
            return cls.zero()
        try:
            return cls(kind, float(arg))
        except ValueError:
            raise ParameterError(f"bad tau schedule argument in {text!r}") from None

    def __str__(self):
        return "zero" if self.kind is TauKind.ZERO else f"{self.kind.value}:{self.value:g}"


def tau_value(schedule, n):
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if schedule.kind is TauKind.ZERO:
        return 0.0
    if schedule.kind is TauKind.POWER_LAW:
        tau = -(n ** (schedule.value - 0.5))
    else:
        tau = -schedule.value * math.log(n) / math.sqrt(n)
    return max(tau, -1.0)


def direction_estimate(y):
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise DecodeError("degenerate_observation", "observation has zero norm")
    return y / norm


@dataclass(eq=False)
class CapFilter:
    u_hat: np.ndarray
    tau: float
    retained: np.ndarray
    scores: np.ndarray
    retained_true_count: int | None = None
    retained_other_count: int | None = None

    @property
    def size(self):
        return int(self.retained.size)


def prefilter(codebook, u_hat, tau, ground_truth=None):
    """Keep every index whose normalized score ``<x_j, u_hat>/sqrt(nP)`` is at least ``tau``."""
    if not -1.0 <= tau <= 0.0:
        raise ParameterError(f"tau must lie in [-1, 0], got {tau}")
    scores = codebook.normalized_scores(u_hat)
    retained = np.flatnonzero(scores >= tau)
    filt = CapFilter(u_hat, tau, retained, scores[retained])
    if ground_truth is not None:
        truth = np.asarray(ground_truth, dtype=np.int64)
        sent = int(np.count_nonzero(scores[truth] >= tau))
        filt.retained_true_count = sent
        filt.retained_other_count = int(retained.size) - sent
    return filt


class Method(enum.Enum):
    EXACT = "ExactEnumeration"
    LOCAL = "LocalSearch"


class Strategy(enum.Enum):
    EXACT_IF_FEASIBLE = "exact"
    LOCAL_ONLY = "local"


@dataclass(eq=False)
class DecodeOutcome:
    estimated_set: np.ndarray
    residual_norm_sq: float
    method: Method
    misses: int | None = None
    filter: CapFilter | None = None
    # residual after each greedy step and each accepted swap (local search only)
    trace: list | None = None

    @property
    def heuristic(self):
        return self.method is Method.LOCAL


def residual_norm_sq(y, codewords):
    r = y - codewords.sum(axis=0)
    return float(r @ r)


def _check_retained(retained, K_a):
    retained = np.asarray(retained, dtype=np.int64)
    if retained.size < K_a:
        raise DecodeError(
            "cap_underflow", f"only {retained.size} codewords retained, need K_a={K_a}"
        )
    return retained


def _argmin_subsets(x, b, K_a):
    """Positions of the lexicographically first K-subset minimizing
    ``sum_{i,j in S} <x_i, x_j> - 2 sum_{i in S} b_i`` (K >= 2).

    The first K-2 positions are enumerated; the last pair is scored in
    row blocks of the Gram matrix.
    """
    R = b.size
    pair_base = np.einsum("ij,ij->i", x, x) - 2 * b
    best_val, best = math.inf, None
    for prefix in itertools.combinations(range(R), K_a - 2):
        start = prefix[-1] + 1 if prefix else 0
        if R - start < 2:
            continue
        pre = list(prefix)
        if pre:
            xp = x[pre]
            pre_val = float((xp @ xp.T).sum() - 2 * b[pre].sum())
            single = pair_base + 2 * (xp @ x.T).sum(axis=0)
        else:
            pre_val, single = 0.0, pair_base
        cols = np.arange(start, R)
        for lo in range(start, R - 1, PAIR_BLOCK_ROWS):
            rows = np.arange(lo, min(R - 1, lo + PAIR_BLOCK_ROWS))
            vals = pre_val + single[rows, None] + single[None, cols] + 2 * (x[rows] @ x[cols].T)
            vals[cols[None, :] <= rows[:, None]] = math.inf
            k = int(np.argmin(vals))
            if vals.flat[k] < best_val:
                best_val = vals.flat[k]
                best = tuple(pre) + (int(rows[k // cols.size]), int(cols[k % cols.size]))
    return best


def ml_decode_exact(y, codebook, retained, K_a, enumeration_cap=DEFAULT_ENUMERATION_CAP):
    """Exhaustive ML over the K_a-subsets of ``retained``.

    Uses ``|y - sum x|^2 = |y|^2 - 2 sum <y, x_i> + sum_{i,j} <x_i, x_j>`` so
    subsets are scored from inner products in vectorized blocks. Ties go to
    the lexicographically smallest index set.
    """
    y = np.asarray(y, dtype=float)
    retained = _check_retained(retained, K_a)
    count = math.comb(retained.size, K_a)
    if count > enumeration_cap:
        raise DecodeError(
            "enumeration_cap",
            f"C({retained.size}, {K_a}) = {count} subsets exceeds the cap {enumeration_cap}; "
            "use ml_decode_local",
        )
    x = codebook.codewords(retained)
    b = x @ y
    if K_a == 1:
        pos = [int(np.argmin(np.einsum("ij,ij->i", x, x) - 2 * b))]
    else:
        pos = list(_argmin_subsets(x, b, K_a))
    return DecodeOutcome(retained[pos], residual_norm_sq(y, x[pos]), Method.EXACT)


def ml_decode_local(y, codebook, retained, K_a, max_rounds=None):
    """Greedy selection followed by first-improvement 1-swap descent.

    Greedy: K_a times, add the unselected retained codeword that most lowers
    the residual (lowest index on ties). Swap phase: scan selected indices in
    ascending order and, for each, unselected indices in ascending order;
    apply the first swap that strictly lowers the residual and rescan. A
    round ends with an accepted swap or a full scan without one.
    """
    y = np.asarray(y, dtype=float)
    retained = _check_retained(retained, K_a)
    if max_rounds is None:
        max_rounds = 50 * K_a
    x = codebook.codewords(retained)
    sq = np.einsum("ij,ij->i", x, x)
    R = retained.size

    selected = np.zeros(R, dtype=bool)
    r = y.copy()
    trace = [float(r @ r)]
    for _ in range(K_a):
        gain = np.where(selected, -np.inf, 2 * (x @ r) - sq)
        j = int(np.argmax(gain))
        selected[j] = True
        r = r - x[j]
        trace.append(float(r @ r))

    for _ in range(max_rounds):
        cur = float(r @ r)
        tol = 1e-12 * max(cur, 1.0)
        xr = x @ r
        swapped = False
        for i in np.flatnonzero(selected):
            # |r + x_i - x_j|^2 - |r|^2 for every candidate j
            delta = 2 * (xr[i] - xr) + sq[i] + sq - 2 * (x @ x[i])
            delta[selected] = np.inf
            better = np.flatnonzero(delta < -tol)
            if better.size:
                j = int(better[0])
                selected[i], selected[j] = False, True
                r = r + x[i] - x[j]
                trace.append(float(r @ r))
                swapped = True
                break
        if not swapped:
            break

    pos = np.flatnonzero(selected)
    chosen = retained[pos]
    return DecodeOutcome(chosen, residual_norm_sq(y, x[pos]), Method.LOCAL, trace=trace)


def decode(observation, codebook, schedule=TauSchedule(), strategy=Strategy.EXACT_IF_FEASIBLE,
           enumeration_cap=DEFAULT_ENUMERATION_CAP, max_rounds=None):
    """Direction estimate, cap filter and ML stage; misses counted against the true set."""
    params = codebook.params
    K_a = params.K_a
    u_hat = direction_estimate(observation.y)
    tau = tau_value(schedule, params.n)
    filt = prefilter(codebook, u_hat, tau, ground_truth=observation.active_set)
    _check_retained(filt.retained, K_a)
    if (strategy is Strategy.EXACT_IF_FEASIBLE
            and math.comb(filt.retained.size, K_a) <= enumeration_cap):
        out = ml_decode_exact(observation.y, codebook, filt.retained, K_a, enumeration_cap)
    else:
        out = ml_decode_local(observation.y, codebook, filt.retained, K_a, max_rounds)
    out.filter = filt
    out.misses = count_misses(observation.active_set, out.estimated_set)
    return out


def count_misses(true_set, estimated_set):
    return int(np.setdiff1d(true_set, estimated_set).size)
