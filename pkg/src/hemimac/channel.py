"""Gaussian many-access channel with a shared spherical codebook."""

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import seeding
from .errors import ParameterError
from .sphere import check_axis, reflect_rows_into_hemisphere, sample_sphere_rows

# codewords generated per seeded block; fixed so codewords do not depend on
# how (or how many at a time) they are requested
BLOCK_ROWS = 8


def derive_sizes(n, d, beta):
    """Codebook size ``round(n**d)`` and active count ``max(1, round(beta*n))``."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not d > 2:
        raise ParameterError(f"d must exceed 2, got {d}")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    M = int(round(n ** d))
    K_a = max(1, int(round(beta * n)))
    if K_a > M:
        raise ParameterError(f"K_a={K_a} exceeds codebook size M={M}")
    return M, K_a


class SamplingMode(enum.Enum):
    FULL_SPHERE = "full"
    HEMISPHERE_CONDITIONED = "conditioned"


class ActiveSetMode(enum.Enum):
    DISTINCT_SUBSET = "distinct"
    IID_MESSAGES = "iid"


@dataclass(frozen=True)
class ChannelParams:
    n: int
    d: float
    beta: float
    P: float = 1.0
    sampling_mode: SamplingMode = SamplingMode.FULL_SPHERE
    # hemisphere axis for the conditioned mode; None means e_1
    axis: tuple | None = None

    def __post_init__(self):
        derive_sizes(self.n, self.d, self.beta)
        if not self.P > 0:
            raise ParameterError(f"P must be positive, got {self.P}")
        if self.axis is not None:
            if len(self.axis) != self.n:
                raise ParameterError("axis dimension does not match n")
            check_axis(self.axis)

    @property
    def sizes(self):
        return derive_sizes(self.n, self.d, self.beta)

    @property
    def M(self):
        return self.sizes[0]

    @property
    def K_a(self):
        return self.sizes[1]

    @property
    def radius(self):
        return math.sqrt(self.n * self.P)

    @property
    def noise_variance(self):
        return 1.0

    @property
    def conditioned(self):
        return self.sampling_mode is SamplingMode.HEMISPHERE_CONDITIONED

    @property
    def reliable_regime(self):
        """Informational flag: beta below the 1/4 reliable-decoding threshold."""
        return self.beta < 0.25

    def hemisphere_axis(self):
        if not self.conditioned:
            return None
        if self.axis is None:
            e1 = np.zeros(self.n)
            e1[0] = 1.0
            return e1
        return np.asarray(self.axis, dtype=float)


@dataclass(eq=False)
class Codebook:
    """M codewords of norm sqrt(nP), generated lazily from ``seed``.

    Codeword ``m`` is row ``m % BLOCK_ROWS`` of block ``m // BLOCK_ROWS``, and
    each block has its own stream derived from ``(seed, block)``. In the
    hemisphere-conditioned mode the indices in ``conditioned_on`` are reflected
    into the hemisphere about the parameter axis.
    """

    params: ChannelParams
    seed: int
    conditioned_on: frozenset = frozenset()

    @property
    def size(self):
        return self.params.M

    @property
    def num_blocks(self):
        return -(-self.size // BLOCK_ROWS)

    def block(self, b):
        p = self.params
        lo = b * BLOCK_ROWS
        rows = min(BLOCK_ROWS, self.size - lo)
        rng = seeding.make_rng(self.seed, b)
        x = sample_sphere_rows(rng, rows, p.n, p.radius)
        if self.conditioned_on:
            idx = [m - lo for m in range(lo, lo + rows) if m in self.conditioned_on]
            if idx:
                axis = p.hemisphere_axis()
                sub, unsure = reflect_rows_into_hemisphere(x[idx], axis)
                # projection too close to zero to trust the sign: redraw from the same stream
                for _ in range(8):
                    if not unsure.any():
                        break
                    sub[unsure] = sample_sphere_rows(rng, int(unsure.sum()), p.n, p.radius)
                    sub[unsure], again = reflect_rows_into_hemisphere(sub[unsure], axis)
                    unsure[unsure] = again
                x[idx] = sub
        return x

    def codewords(self, indices):
        """Rows for the given indices, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.size):
            raise ParameterError("codeword index out of range")
        if "matrix" in self.__dict__:
            return self.matrix[indices]
        out = np.empty((indices.size, self.params.n))
        blocks = indices // BLOCK_ROWS
        for b in np.unique(blocks):
            sel = blocks == b
            out[sel] = self.block(int(b))[indices[sel] - b * BLOCK_ROWS]
        return out

    def iter_chunks(self, rows=65536):
        """Yield ``(start, matrix)`` chunks covering the whole codebook in order."""
        per = max(1, rows // BLOCK_ROWS)
        for first in range(0, self.num_blocks, per):
            last = min(self.num_blocks, first + per)
            yield first * BLOCK_ROWS, np.vstack([self.block(b) for b in range(first, last)])

    @cached_property
    def matrix(self):
        """The full M x n codeword matrix (materialized once)."""
        return np.vstack([chunk for _, chunk in self.iter_chunks()])

    def normalized_scores(self, direction):
        """``<x_m, direction> / sqrt(nP)`` for every codeword, streamed in chunks."""
        if "matrix" in self.__dict__:
            return self.matrix @ direction / self.params.radius
        out = np.empty(self.size)
        for start, chunk in self.iter_chunks():
            out[start:start + chunk.shape[0]] = chunk @ direction
        return out / self.params.radius


def build_codebook(params, seed, conditioned_on=()):
    """Codebook for ``params``; ``conditioned_on`` lists the indices to draw from the hemisphere."""
    conditioned_on = frozenset(int(i) for i in conditioned_on)
    if conditioned_on and not params.conditioned:
        raise ParameterError("conditioned indices given for a full-sphere codebook")
    return Codebook(params, int(seed), conditioned_on)


def draw_active_set(params, rng, mode=ActiveSetMode.DISTINCT_SUBSET):
    """Active message indices, sorted.

    DISTINCT_SUBSET returns a uniform K_a-subset. IID_MESSAGES draws K_a i.i.d.
    messages and returns ``(unique_sorted_indices, collided)``.
    """
    M, K_a = params.sizes
    if mode is ActiveSetMode.DISTINCT_SUBSET:
        return np.sort(rng.choice(M, size=K_a, replace=False)).astype(np.int64)
    picks = rng.integers(0, M, size=K_a)
    unique = np.unique(picks)
    return unique.astype(np.int64), bool(unique.size < K_a)


@dataclass(frozen=True, eq=False)
class Observation:
    y: np.ndarray
    active_set: np.ndarray
    noise_seed: int
    axis: np.ndarray | None = None


def transmit(codebook, active_set, noise_seed, zero_noise=False):
    """Channel output ``y = sum_{m in S} x_m + Z`` with Z ~ N(0, I_n) from ``noise_seed``.

    ``zero_noise`` suppresses Z; it is a diagnostic switch only.
    """
    active = np.sort(np.asarray(active_set, dtype=np.int64))
    if active.size == 0:
        raise ParameterError("empty active set")
    if np.unique(active).size != active.size:
        raise ParameterError("active set has repeated indices")
    x = codebook.codewords(active)
    y = x.sum(axis=0)
    if not zero_noise:
        y = y + seeding.make_rng(noise_seed).standard_normal(codebook.params.n)
    return Observation(y, active, int(noise_seed), codebook.params.hemisphere_axis())


def collision_bound(params):
    """``(C(K_a, 2) / M, beta^2 n^2 / (2 n^d))``: the message-collision bound and its looser form."""
    M, K_a = params.sizes
    tight = math.comb(K_a, 2) / M
    loose = params.beta ** 2 * params.n ** 2 / (2 * params.n ** params.d)
    return tight, loose
