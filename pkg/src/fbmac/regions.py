"""Second-order achievable and outer rate-region boundaries.

All regions here are downward closed and star shaped from the origin of the
rate plane, so boundaries are sampled along rays ``(cos t, sin t)`` for
``t in (0, pi/2)`` and returned as monotone polylines (r2 non-increasing in
r1).  Third-order ``O(1/n)`` and ``O(log n / n)`` corrections are uniformly
dropped; negative rates clamp to zero.

Region inventory (kinds):

* ``joint``       -- trivariate quantile set of the shell dispersion matrix.
* ``splitting``   -- union over an error-budget simplex of scalar-quantile
  pentagons (per-user and sum constraints).
* ``iid``         -- same ray construction with the i.i.d.-Gaussian capacity
  vector and dispersion matrix at backed-off powers.
* ``sumshell``    -- hypothetical sum-power-shell ensemble (rank-2 matrix);
  conjectured to be an outer bound, flagged in metadata.
* ``gallager``    -- truncated-Gaussian-ensemble error-exponent region.
* ``tdma``        -- time sharing with power control and split error budgets.
* ``su-outer``    -- single-user outer rectangle.
* ``conjectured-sum-outer`` -- scalar sum-rate cap intersected with the
  single-user rectangle; conjecture, not a theorem.
* ``pentagon``    -- asymptotic capacity pentagon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from ._rng import thread_map
from .core import (
    LN2,
    DomainError,
    PowerPair,
    SecondOrderParams,
    capacity,
    capacity_vector,
    dispersion,
    dispersion_matrix_iid,
    dispersion_matrix_shell,
    dispersion_matrix_sumshell,
)
from .gaussquad import boundary_scale, q_inv_scalar

REGION_KINDS = (
    "joint",
    "splitting",
    "iid",
    "gallager",
    "tdma",
    "su-outer",
    "sumshell",
    "conjectured-sum-outer",
    "pentagon",
)


@dataclass(frozen=True, eq=False)
class RegionBoundary:
    """Sampled boundary polyline with provenance metadata."""

    kind: str
    params: dict
    points: np.ndarray
    units: str = "nats"
    empty: bool = False

    #: monotone-repair budget; covers root-finder jitter plus the residual
    #: lattice error of rank-deficient quantile sets, far below the 1e-3
    #: resolution the boundaries are consumed at
    _REPAIR_TOL = 5e-4

    def __post_init__(self) -> None:
        if self.kind not in REGION_KINDS:
            raise DomainError(f"unknown region kind {self.kind!r}")
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.empty:
            pts = pts[:0]
        else:
            if pts.shape[0] == 0:
                raise DomainError("non-empty boundary required")
            if (pts < -1e-12).any():
                raise DomainError("rates must be nonnegative")
            pts = np.maximum(pts, 0.0)
            # points arrive in boundary order (r1 ascending along the curve);
            # vertical/flat segments carry solver jitter, projected out here
            r1 = np.maximum.accumulate(pts[:, 0])
            r2 = np.minimum.accumulate(pts[:, 1])
            if (r1 - pts[:, 0]).max() > self._REPAIR_TOL or (pts[:, 1] - r2).max() > self._REPAIR_TOL:
                raise DomainError("boundary is not monotone")
            pts = np.stack([r1, r2], axis=1)
        object.__setattr__(self, "points", pts)

    def in_units(self, units: str) -> "RegionBoundary":
        if units not in ("nats", "bits"):
            raise DomainError(f"unknown units {units!r}")
        if units == self.units:
            return self
        factor = 1.0 / LN2 if units == "bits" else LN2
        return RegionBoundary(self.kind, self.params, self.points * factor, units, self.empty)


@dataclass(frozen=True)
class SplitWeights:
    """Positive error-budget weights summing to one."""

    l1: float
    l2: float
    l3: float

    def __post_init__(self) -> None:
        if min(self.l1, self.l2, self.l3) < 0:
            raise DomainError("weights must be nonnegative")
        if abs(self.l1 + self.l2 + self.l3 - 1.0) > 1e-12:
            raise DomainError("weights must sum to 1")


@dataclass(frozen=True)
class GallagerParams:
    """Knobs of the error-exponent region: prefactor constant and (n, eps)."""

    a: float
    n: int
    eps: float

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise DomainError("a must be positive")
        SecondOrderParams(self.n, self.eps)


def ray_angles(num_points: int) -> np.ndarray:
    if num_points < 8:
        raise DomainError("need at least 8 rays")
    return (np.arange(num_points) + 0.5) / num_points * (math.pi / 2.0)


def _ray_points(radii: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Boundary points in r1-ascending order (descending angle)."""
    pts = np.stack([radii * np.cos(thetas), radii * np.sin(thetas)], axis=1)
    return np.maximum(pts[::-1], 0.0)


def p2p_second_order_rate(n: int, eps: float, p: float) -> float:
    """C(p) - sqrt(V(p)/n) Qinv(eps), clamped at zero; nats per use."""
    SecondOrderParams(n, eps)
    rate = capacity(p) - math.sqrt(dispersion(p) / n) * q_inv_scalar(eps)
    return max(rate, 0.0)


# ---------------------------------------------------------------------------
# trivariate quantile-set regions (shell / iid / sumshell)
# ---------------------------------------------------------------------------


def _quantile_region_setup(kind: str, pp: PowerPair, n: int, delta: float):
    if kind == "shell":
        return capacity_vector(pp).as_array(), dispersion_matrix_shell(pp).entries
    if kind == "sumshell":
        return capacity_vector(pp).as_array(), dispersion_matrix_sumshell(pp).entries
    if kind == "iid":
        if delta >= 1.0:
            raise DomainError("power back-off delta must be < 1")
        ppb = PowerPair(pp.p1 * (1.0 - delta), pp.p2 * (1.0 - delta))
        return capacity_vector(ppb).as_array(), dispersion_matrix_iid(ppb).entries
    raise DomainError(f"unknown quantile-region kind {kind!r}")


def resolve_delta(delta_rule, n: int) -> float:
    """Power back-off for the i.i.d.-Gaussian region: 0, n^(-1/4), or a float."""
    if delta_rule in (None, 0, 0.0, "zero"):
        return 0.0
    if delta_rule in ("n^-1/4", "quartic"):
        return float(n) ** -0.25
    delta = float(delta_rule)
    if not (0.0 <= delta < 1.0):
        raise DomainError("delta must lie in [0, 1)")
    return delta


def second_order_ray(
    n: int,
    eps: float,
    pp: PowerPair,
    theta: float,
    kind: str = "shell",
    samples: int = 1 << 12,
    seed=0,
    delta: float = 0.0,
) -> float:
    """Largest radius r with (r cos, r sin, r(cos+sin)) inside the quantile region."""
    SecondOrderParams(n, eps)
    cvec, sigma = _quantile_region_setup(kind, pp, n, delta)
    c, s = math.cos(theta), math.sin(theta)
    direction = math.sqrt(n) * np.array([c, s, c + s])
    origin = math.sqrt(n) * cvec
    return boundary_scale(eps, sigma, direction, samples=samples, seed=seed, origin=origin)


def _quantile_boundary(
    kind: str, n, eps, pp, num_points, samples, seed, delta=0.0, extra_params=None
) -> RegionBoundary:
    thetas = ray_angles(num_points)
    cvec, sigma = _quantile_region_setup(kind, pp, n, delta)
    sqrt_n = math.sqrt(n)
    origin = sqrt_n * cvec
    # a rank-deficient covariance leaves a step in the conditioned integrand;
    # spend more points there to keep the sampled boundary smooth
    if np.linalg.eigvalsh(sigma).min() < 1e-8 * float(np.trace(sigma)):
        samples = 2 * samples

    # one shared point set across rays keeps the sampled boundary smooth
    def ray(theta):
        c, s = math.cos(theta), math.sin(theta)
        direction = sqrt_n * np.array([c, s, c + s])
        hint = 1.02 * pentagon_ray(theta, cvec[0], cvec[1], cvec[2]) + 0.1
        return boundary_scale(
            eps, sigma, direction, samples=samples, seed=seed, origin=origin, bracket_hint=hint
        )

    radii = np.array(thread_map(ray, thetas))
    params = {
        "n": n,
        "eps": eps,
        "p1": pp.p1,
        "p2": pp.p2,
        "samples": samples,
        "seed": seed,
    }
    if extra_params:
        params.update(extra_params)
    kind_name = {"shell": "joint", "iid": "iid", "sumshell": "sumshell"}[kind]
    return RegionBoundary(kind_name, params, _ray_points(radii, thetas))


def joint_outage_boundary(
    n: int, eps: float, pp: PowerPair, num_points: int = 256, samples: int = 1 << 12, seed=0
) -> RegionBoundary:
    """Power-shell joint-outage region boundary."""
    SecondOrderParams(n, eps)
    return _quantile_boundary("shell", n, eps, pp, num_points, samples, seed)


def sumshell_hypothetical_boundary(
    n: int, eps: float, pp: PowerPair, num_points: int = 256, samples: int = 1 << 12, seed=0
) -> RegionBoundary:
    """Hypothetical sum-power-shell region; conjectured outer bound."""
    SecondOrderParams(n, eps)
    return _quantile_boundary(
        "sumshell", n, eps, pp, num_points, samples, seed, extra_params={"conjectured_outer": True}
    )


def iid_gaussian_boundary(
    n: int,
    eps: float,
    pp: PowerPair,
    delta_rule="zero",
    num_points: int = 256,
    samples: int = 1 << 12,
    seed=0,
) -> RegionBoundary:
    """i.i.d.-Gaussian-input region boundary at backed-off powers."""
    SecondOrderParams(n, eps)
    delta = resolve_delta(delta_rule, n)
    return _quantile_boundary(
        "iid", n, eps, pp, num_points, samples, seed, delta=delta, extra_params={"delta": delta}
    )


# ---------------------------------------------------------------------------
# outage splitting
# ---------------------------------------------------------------------------


def _clamped_penalty(level: float) -> float:
    """Scalar quantile with no rate bonus for levels >= 1/2 (achievability only)."""
    if level >= 1.0:
        return math.inf
    return max(q_inv_scalar(level), 0.0)


def _splitting_bounds(n: int, eps: float, pp: PowerPair, resolution: int):
    """Per-user and sum rate caps for every positive weight triple on the grid."""
    if resolution < 4:
        raise DomainError("lambda grid resolution must be >= 4")
    i = np.arange(1, resolution - 1)
    pairs = [(a, b) for a in i for b in range(1, resolution - a)]
    lam = np.array([(a, b, resolution - a - b) for a, b in pairs], dtype=float) / resolution
    v_sum = dispersion_matrix_shell(pp).entries[2, 2]
    pen1 = np.array([_clamped_penalty(l * eps) for l in lam[:, 0]])
    pen2 = np.array([_clamped_penalty(l * eps) for l in lam[:, 1]])
    pen3 = np.array([_clamped_penalty(l * eps) for l in lam[:, 2]])
    b1 = np.maximum(capacity(pp.p1) - math.sqrt(dispersion(pp.p1) / n) * pen1, 0.0)
    b2 = np.maximum(capacity(pp.p2) - math.sqrt(dispersion(pp.p2) / n) * pen2, 0.0)
    b3 = np.maximum(capacity(pp.p_sum) - math.sqrt(v_sum / n) * pen3, 0.0)
    return b1, b2, b3


def splitting_ray(
    n: int, eps: float, pp: PowerPair, theta: float, resolution: int = 64
) -> float:
    """Ray radius of the union of split-budget pentagons."""
    b1, b2, b3 = _splitting_bounds(n, eps, pp, resolution)
    c, s = math.cos(theta), math.sin(theta)
    r = np.minimum(np.minimum(b1 / c, b2 / s), b3 / (c + s))
    return float(r.max())


def outage_splitting_boundary(
    n: int,
    eps: float,
    pp: PowerPair,
    lambda_grid_resolution: int = 64,
    num_points: int = 256,
) -> RegionBoundary:
    """Union over the weight simplex of three scalar-quantile constraints."""
    SecondOrderParams(n, eps)
    b1, b2, b3 = _splitting_bounds(n, eps, pp, lambda_grid_resolution)
    thetas = ray_angles(num_points)
    c = np.cos(thetas)
    s = np.sin(thetas)
    r = np.minimum(
        np.minimum(b1[:, None] / c[None, :], b2[:, None] / s[None, :]),
        b3[:, None] / (c + s)[None, :],
    )
    radii = r.max(axis=0)
    params = {
        "n": n,
        "eps": eps,
        "p1": pp.p1,
        "p2": pp.p2,
        "lambda_grid_resolution": lambda_grid_resolution,
    }
    return RegionBoundary("splitting", params, _ray_points(radii, thetas))


# ---------------------------------------------------------------------------
# error-exponent region of the truncated-Gaussian ensemble
# ---------------------------------------------------------------------------


class ExponentValue(NamedTuple):
    value: float
    above_capacity: bool


def _individual_switch_rate(p: float) -> float:
    return 0.5 * math.log((2.0 + p + math.sqrt(4.0 + p * p)) / 4.0)


def gallager_individual_exponent(rate: float, p: float) -> ExponentValue:
    """Per-user error exponent (nats) of the truncated-Gaussian ensemble.

    Two branches meeting tangentially (slope -1) at the switch rate; the
    low-rate branch is the straight line through that point.  Rates above
    capacity return 0 with the flag set.
    """
    if rate < 0 or p <= 0:
        raise DomainError("need rate >= 0 and p > 0")
    cap = capacity(p)
    if rate >= cap:
        return ExponentValue(0.0, rate > cap)
    r_c = _individual_switch_rate(p)
    if rate >= r_c:
        s = math.exp(2.0 * rate)
        alpha = (p * (s - 1.0) / 2.0) * (math.sqrt(1.0 + 4.0 * s / (p * (s - 1.0))) - 1.0)
        return ExponentValue((p - alpha) / (2.0 * s) + 0.5 * math.log(s - alpha), False)
    beta = (2.0 + p + math.sqrt(4.0 + p * p)) / 4.0
    value = (1.0 - beta + p / 2.0) + 0.5 * math.log(beta * (beta - p / 2.0)) - rate
    return ExponentValue(value, False)


def _sum_switch_rate(ps: float) -> float:
    s_c = 0.5 * (1.0 + ps / 4.0 + math.sqrt(1.0 + ps / 2.0 + ps * ps / 4.0))
    return 0.5 * math.log(s_c)


def gallager_sum_exponent(rate_sum: float, ps: float) -> ExponentValue:
    """Sum-rate error exponent (nats) of the truncated-Gaussian ensemble.

    The curved branch is parameterized by a tilt that runs from 0 at capacity
    to 1 at the switch rate; below it the exponent continues as the slope -1
    tangent line.
    """
    if rate_sum < 0 or ps <= 0:
        raise DomainError("need rate >= 0 and ps > 0")
    cap = capacity(ps)
    if rate_sum >= cap:
        return ExponentValue(0.0, rate_sum > cap)
    r_c = _sum_switch_rate(ps)
    if rate_sum >= r_c:
        s = math.exp(2.0 * rate_sum)
        bracket = 0.5 + 2.0 * s / ps - 0.5 * math.sqrt(1.0 + 8.0 * s / ps + 16.0 * s / (ps * ps))
        rho = bracket ** -0.5 - 1.0
        rho = max(rho, 0.0)  # round-off guard at capacity
        theta1 = (1.0 + rho - ps) / 2.0 + 0.5 * math.sqrt(ps * ps + 2.0 * ps + (1.0 + rho) ** 2)
        return ExponentValue((1.0 + rho - theta1) + math.log(theta1 / (1.0 + rho)), False)
    theta2 = 1.0 - ps / 2.0 + 0.5 * math.sqrt(ps * ps + 2.0 * ps + 4.0)
    value = (2.0 - theta2) + math.log(theta2 / 2.0) + r_c - rate_sum
    return ExponentValue(value, False)


def _gallager_budget(r1: float, r2: float, gp: GallagerParams, pp: PowerPair) -> float:
    a, n = gp.a, gp.n
    e1 = gallager_individual_exponent(r1, pp.p1).value
    e2 = gallager_individual_exponent(r2, pp.p2).value
    e3 = gallager_sum_exponent(r1 + r2, pp.p_sum).value
    return a * n * math.exp(-n * e1) + a * n * math.exp(-n * e2) + a * n * n * math.exp(-n * e3)


def gallager_ray(gp: GallagerParams, pp: PowerPair, theta: float, tol: float = 1e-9) -> float:
    """Ray radius of the exponent-budget region; 0 if the origin is infeasible."""
    c, s = math.cos(theta), math.sin(theta)
    if _gallager_budget(0.0, 0.0, gp, pp) > gp.eps:
        return 0.0
    lo, hi = 0.0, 2.0 * (capacity(pp.p1) + capacity(pp.p2))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _gallager_budget(mid * c, mid * s, gp, pp) <= gp.eps:
            lo = mid
        else:
            hi = mid
    return lo


def gallager_boundary(gp: GallagerParams, pp: PowerPair, num_points: int = 256) -> RegionBoundary:
    """Boundary of the rate pairs whose three-term exponent budget meets eps."""
    params = {"n": gp.n, "eps": gp.eps, "a": gp.a, "p1": pp.p1, "p2": pp.p2}
    if _gallager_budget(0.0, 0.0, gp, pp) > gp.eps:
        return RegionBoundary("gallager", params, np.empty((0, 2)), empty=True)
    thetas = ray_angles(num_points)
    radii = np.array(thread_map(lambda t: gallager_ray(gp, pp, t), thetas))
    return RegionBoundary("gallager", params, _ray_points(radii, thetas))


# ---------------------------------------------------------------------------
# TDMA with power control
# ---------------------------------------------------------------------------


def tdma_point(n: int, eps: float, pp: PowerPair, alpha: float, beta: float) -> tuple[float, float]:
    """Rates of one time-sharing configuration; degenerate shares clamped."""
    alpha = min(max(alpha, 1e-9), 1.0 - 1e-9)
    beta = min(max(beta, 1e-12), 1.0 - 1e-12)
    abar = 1.0 - alpha
    eps2 = (1.0 - beta) * eps / (1.0 - beta * eps)
    r1 = alpha * capacity(pp.p1 / alpha) - math.sqrt(
        alpha * dispersion(pp.p1 / alpha) / n
    ) * q_inv_scalar(beta * eps)
    r2 = abar * capacity(pp.p2 / abar) - math.sqrt(
        abar * dispersion(pp.p2 / abar) / n
    ) * q_inv_scalar(eps2)
    return max(r1, 0.0), max(r2, 0.0)


def _tdma_grid_points(n, eps, pp, alpha_grid, beta_grid) -> np.ndarray:
    alphas = np.asarray(alpha_grid, dtype=float)
    betas = np.asarray(beta_grid, dtype=float)
    if ((alphas <= 0) | (alphas >= 1)).any() or ((betas <= 0) | (betas >= 1)).any():
        raise DomainError("grids must lie strictly inside (0, 1)")
    a = alphas[:, None]
    b = betas[None, :]
    abar = 1.0 - a
    pen1 = np.maximum(-ndtri(b * eps), 0.0)
    eps2 = (1.0 - b) * eps / (1.0 - b * eps)
    pen2 = np.maximum(-ndtri(eps2), 0.0)
    c1 = 0.5 * np.log1p(pp.p1 / a)
    v1 = 0.5 * (pp.p1 / a) * (pp.p1 / a + 2.0) / (1.0 + pp.p1 / a) ** 2
    c2 = 0.5 * np.log1p(pp.p2 / abar)
    v2 = 0.5 * (pp.p2 / abar) * (pp.p2 / abar + 2.0) / (1.0 + pp.p2 / abar) ** 2
    r1 = np.maximum(a * c1 - np.sqrt(a * v1 / n) * pen1, 0.0)
    r2 = np.maximum(abar * c2 - np.sqrt(abar * v2 / n) * pen2, 0.0)
    return np.stack([r1.ravel(), r2.ravel()], axis=1)


def tdma_ray(n: int, eps: float, pp: PowerPair, theta: float, grid_size: int = 199) -> float:
    """Ray radius of the union of rectangles dominated by grid points."""
    grid = np.linspace(1.0 / (grid_size + 1), grid_size / (grid_size + 1), grid_size)
    pts = _tdma_grid_points(n, eps, pp, grid, grid)
    c, s = math.cos(theta), math.sin(theta)
    return float(np.minimum(pts[:, 0] / c, pts[:, 1] / s).max())


def tdma_boundary(
    n: int, eps: float, pp: PowerPair, alpha_grid=None, beta_grid=None
) -> RegionBoundary:
    """Pareto envelope over the time-share and error-split grids."""
    SecondOrderParams(n, eps)
    if alpha_grid is None:
        alpha_grid = np.linspace(1.0 / 200.0, 199.0 / 200.0, 199)
    if beta_grid is None:
        beta_grid = np.linspace(1.0 / 200.0, 199.0 / 200.0, 199)
    pts = _tdma_grid_points(n, eps, pp, alpha_grid, beta_grid)
    order = np.argsort(-pts[:, 0], kind="stable")
    pts = pts[order]
    best = np.maximum.accumulate(pts[:, 1])
    keep = pts[:, 1] >= best  # points not dominated by a higher-r1 point
    frontier = pts[keep][::-1]
    # drop points dominated in r2 as r1 decreases duplicate-wise
    _, first = np.unique(frontier[:, 0], return_index=True)
    frontier = frontier[first]
    params = {"n": n, "eps": eps, "p1": pp.p1, "p2": pp.p2, "grid": len(alpha_grid)}
    return RegionBoundary("tdma", params, frontier)


# ---------------------------------------------------------------------------
# outer boxes and pentagons
# ---------------------------------------------------------------------------


def _pentagon_polyline(b1: float, b2: float, bs: float) -> np.ndarray:
    """Monotone polyline of {r1 <= b1, r2 <= b2, r1 + r2 <= bs}."""
    b1, b2, bs = max(b1, 0.0), max(b2, 0.0), max(bs, 0.0)
    pts = [(0.0, min(b2, bs))]
    if bs >= b1 + b2:  # rectangle
        pts.append((b1, b2))
    else:
        if bs > b2:
            pts.append((bs - b2, b2))
        if bs > b1:
            pts.append((b1, bs - b1))
    pts.append((min(b1, bs), 0.0))
    uniq = []
    for q in pts:
        if not uniq or (abs(q[0] - uniq[-1][0]) > 1e-15 or abs(q[1] - uniq[-1][1]) > 1e-15):
            uniq.append(q)
    return np.array(uniq)


def pentagon_ray(theta: float, b1: float, b2: float, bs: float) -> float:
    c, s = math.cos(theta), math.sin(theta)
    return min(b1 / c, b2 / s, bs / (c + s))


def su_outer_box(n: int, eps: float, pp: PowerPair) -> RegionBoundary:
    """Single-user outer rectangle (full error budget on each outage)."""
    SecondOrderParams(n, eps)
    b1 = p2p_second_order_rate(n, eps, pp.p1)
    b2 = p2p_second_order_rate(n, eps, pp.p2)
    pts = np.array([[0.0, b2], [b1, b2], [b1, 0.0]])
    params = {"n": n, "eps": eps, "p1": pp.p1, "p2": pp.p2}
    return RegionBoundary("su-outer", params, pts)


def conjectured_sum_outer_boundary(n: int, eps: float, pp: PowerPair) -> RegionBoundary:
    """Scalar sum-rate cap intersected with the single-user box; conjecture only."""
    SecondOrderParams(n, eps)
    b1 = p2p_second_order_rate(n, eps, pp.p1)
    b2 = p2p_second_order_rate(n, eps, pp.p2)
    bs = max(capacity(pp.p_sum) - math.sqrt(dispersion(pp.p_sum) / n) * q_inv_scalar(eps), 0.0)
    params = {"n": n, "eps": eps, "p1": pp.p1, "p2": pp.p2, "conjecture": True}
    return RegionBoundary("conjectured-sum-outer", params, _pentagon_polyline(b1, b2, bs))


def cover_wyner_pentagon(pp: PowerPair) -> RegionBoundary:
    """Asymptotic capacity pentagon."""
    b1, b2 = capacity(pp.p1), capacity(pp.p2)
    bs = capacity(pp.p_sum)
    params = {"p1": pp.p1, "p2": pp.p2}
    return RegionBoundary("pentagon", params, _pentagon_polyline(b1, b2, bs))
