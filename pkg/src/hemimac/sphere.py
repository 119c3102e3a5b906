"""Sampling and geometric predicates on the sphere of radius sqrt(nP)."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.special import gammaln

from .errors import ParameterError

MAX_REDRAWS = 8
NORM_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class SphereVector:
    """A point on the sphere of the given radius."""

    coords: np.ndarray
    radius: float

    def __post_init__(self):
        if self.coords.ndim != 1 or self.coords.size < 2:
            raise ParameterError("a sphere vector needs n >= 2 coordinates")
        norm = float(np.linalg.norm(self.coords))
        if abs(norm - self.radius) > NORM_RTOL * self.radius:
            raise ParameterError(f"norm {norm!r} does not match radius {self.radius!r}")

    @property
    def n(self):
        return self.coords.size

    @property
    def normalized(self):
        """The point rescaled onto the unit sphere."""
        return self.coords / self.radius


def _check_dim_radius(n, radius):
    if n < 2:
        raise ParameterError(f"dimension must be >= 2, got {n}")
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius}")


def sample_sphere_rows(rng, rows, n, radius=1.0):
    """Draw ``rows`` independent uniform points on the n-sphere of ``radius``.

    Rows are Gaussian vectors rescaled to the radius. A row with zero norm is
    redrawn from the same stream; after MAX_REDRAWS attempts a RuntimeError
    is raised.
    """
    g = rng.standard_normal((rows, n))
    norms = np.linalg.norm(g, axis=1)
    for _ in range(MAX_REDRAWS):
        bad = norms == 0.0
        if not bad.any():
            break
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        norms[bad] = np.linalg.norm(g[bad], axis=1)
    else:
        if (norms == 0.0).any():
            raise RuntimeError(f"degenerate Gaussian draw persisted after {MAX_REDRAWS} redraws")
    g *= (radius / norms)[:, None]
    return g


def sample_uniform_sphere(n, radius, rng):
    _check_dim_radius(n, radius)
    return SphereVector(sample_sphere_rows(rng, 1, n, radius)[0], float(radius))


def check_axis(axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ParameterError("hemisphere axis must be a unit vector")
    return axis


def reflect_rows_into_hemisphere(x, axis):
    """Reflect rows of ``x`` with negative projection on ``axis`` across its hyperplane.

    Returns the rows together with a boolean mask of rows whose projection is
    too close to zero for the sign of the reflected projection to be trusted
    (``|<x, axis>| <= 1e-12 * |x|``); callers redraw those.
    """
    proj = x @ axis
    neg = proj < 0
    if neg.any():
        x[neg] -= 2.0 * proj[neg, None] * axis[None, :]
    after = x @ axis
    scale = np.linalg.norm(x, axis=1)
    unsure = (np.abs(proj) <= 1e-12 * scale) | (after < 0)
    return x, unsure


def sample_hemisphere(n, radius, axis, rng):
    """Uniform draw on the closed hemisphere ``<x, axis> >= 0`` (by reflection)."""
    _check_dim_radius(n, radius)
    axis = check_axis(axis)
    if axis.size != n:
        raise ParameterError("axis dimension does not match n")
    for _ in range(MAX_REDRAWS):
        x = sample_sphere_rows(rng, 1, n, radius)
        x, unsure = reflect_rows_into_hemisphere(x, axis)
        if not unsure[0]:
            return SphereVector(x[0], float(radius))
    raise RuntimeError("could not draw a point off the hemisphere boundary")


@dataclass
class HemisphereWitness:
    is_hemispherical: bool
    axis: np.ndarray | None
    margin: float
    undecided: bool = False
    method: str = field(default="")


def _as_unit_rows(points):
    if isinstance(points, np.ndarray):
        x = np.atleast_2d(np.asarray(points, dtype=float))
    else:
        points = list(points)
        if not points:
            raise ParameterError("is_hemispherical needs at least one point")
        x = np.vstack([p.coords if isinstance(p, SphereVector) else np.asarray(p, float) for p in points])
    if x.shape[0] == 0:
        raise ParameterError("is_hemispherical needs at least one point")
    norms = np.linalg.norm(x, axis=1)
    if (norms == 0).any():
        raise ParameterError("points must be non-zero")
    return x / norms[:, None]


def _max_margin_lp(s):
    """Solve max t s.t. <s_i, u> >= t, |u|_inf <= 1, t <= 1. Returns (u, t) or None."""
    num, n = s.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a = np.hstack([-s, np.ones((num, 1))])
    res = linprog(c, A_ub=a, b_ub=np.zeros(num), bounds=[(-1, 1)] * n + [(None, 1)],
                  method="highs")
    if res.status != 0:
        return None
    return res.x[:n], -res.fun


def is_hemispherical(points, tol=1e-9):
    """Decide whether the points lie in a common open hemisphere.

    The points are rescaled to unit norm. The best margin
    ``max_u min_i <s_i, u>`` is the distance from the origin to the convex
    hull, so a non-negative least squares fit of ``[S^T; 1] lam = e`` yields
    either a witness axis ``S^T lam`` or a convex combination close to the
    origin. Both are checked directly; when neither checks out (the least
    squares solution is inexact) a max-margin linear program decides.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    s = _as_unit_rows(points)
    num, n = s.shape

    centroid = s.sum(axis=0)
    cnorm = np.linalg.norm(centroid)
    if cnorm > 0:
        u = centroid / cnorm
        margin = float((s @ u).min())
        if margin > tol:
            return HemisphereWitness(True, u, margin, method="centroid")

    a = np.vstack([s.T, np.ones(num)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    lam, _ = nnls(a, b)
    total = lam.sum()
    if total > 0:
        p = s.T @ lam
        dist = float(np.linalg.norm(p)) / total
        if dist <= tol:
            return HemisphereWitness(False, None, -dist, method="hull")
        u = p / np.linalg.norm(p)
        margin = float((s @ u).min())
        if margin > tol:
            return HemisphereWitness(True, u, margin, method="hull")

    sol = _max_margin_lp(s)
    if sol is None:
        return HemisphereWitness(False, None, -math.inf, undecided=True, method="lp")
    u, t = sol
    norm = np.linalg.norm(u)
    if t > 0 and norm > 0:
        u = u / norm
        margin = float((s @ u).min())
        if margin > tol:
            return HemisphereWitness(True, u, margin, method="lp")
    return HemisphereWitness(False, None, float(t), method="lp")


def cap_hausdorff_distance(tau):
    """Hausdorff distance (radians) between the cap ``<s, u> >= tau`` and the hemisphere."""
    if not -1.0 <= tau <= 0.0:
        raise ParameterError(f"tau must lie in [-1, 0], got {tau}")
    return math.acos(tau) - math.pi / 2


def projection_log_pdf(t, n):
    """Log-density of one coordinate of a uniform point on the unit (n-1)-sphere.

    Vectorized over ``t``; returns ``-inf`` for ``|t| >= 1``.
    """
    if n < 2:
        raise ParameterError(f"dimension must be >= 2, got {n}")
    t = np.asarray(t, dtype=float)
    log_norm = gammaln(n / 2) - gammaln((n - 1) / 2) - 0.5 * math.log(math.pi)
    inside = np.abs(t) < 1
    with np.errstate(divide="ignore", invalid="ignore"):
        body = log_norm + 0.5 * (n - 3) * np.log1p(-np.where(inside, t, 0.0) ** 2)
    out = np.where(inside, body, -np.inf)
    return float(out) if out.ndim == 0 else out


def projection_pdf(t, n):
    return np.exp(projection_log_pdf(t, n))
