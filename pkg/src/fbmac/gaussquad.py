"""Gaussian tails, quantiles, and the trivariate lower-orthant probability.

The set-valued quantile of a centered trivariate Gaussian,

    Qinv(eps; Sigma) = { z : Pr[N(0, Sigma) <= z] >= 1 - eps },

is explored through two primitives: :func:`lower_orthant_prob`, which
estimates ``Pr[N(0, Sigma) <= z]`` by quasi-Monte Carlo integration of the
Genz separation-of-variables representation, and :func:`boundary_scale`,
which solves along a ray for the scale at which the ray crosses the
quantile-set boundary.

The integrand after Cholesky conditioning lives on the unit square (or unit
interval for effectively bivariate queries); it is sampled with a rank-1
Kronecker lattice under a tent periodization, repeated over a small number of
randomly shifted replicates whose means give the reported standard error.
All membership tests inside one :func:`boundary_scale` call reuse one point
set, so the profile being root-found is a smooth deterministic function of
the scale.  For fixed ``(seed, samples)`` every estimate is bit-identical
across runs and worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from ._rng import substream
from .core import DomainError

#: eigenvalue floor, relative to trace, applied before Cholesky factorization;
#: keeps rank-deficient covariances (the sum-shell matrix is rank 2) integrable
EIG_FLOOR = 1e-12

#: generating vectors of the Kronecker lattices (fractional parts of powers of
#: the inverse golden ratio / plastic constant)
_GEN_1D = np.array([0.6180339887498949])
_GEN_2D = np.array([0.7548776662466927, 0.5698402909980532])

_TINY = 1e-300
_ONE_MINUS = 1.0 - 1e-16


class BracketError(RuntimeError):
    """Bracket expansion failed to enclose a quantile-set boundary crossing."""


def q_scalar(x: float) -> float:
    """Standard Gaussian upper-tail probability Q(x) via erfc."""
    x = float(x)
    if math.isnan(x):
        raise DomainError("q_scalar requires a non-NaN argument")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_inv_scalar(eps: float) -> float:
    """Functional inverse of :func:`q_scalar` on (0, 1)."""
    eps = float(eps)
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    return float(-ndtri(eps))


@dataclass(frozen=True, eq=False)
class OrthantQuery:
    """A covariance and a (possibly +/-inf) threshold vector."""

    sigma: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if s.shape != (3, 3) or z.shape != (3,):
            raise DomainError("expected a 3x3 covariance and a 3-vector threshold")
        if not np.allclose(s, s.T, rtol=0.0, atol=1e-10 * max(1.0, abs(s).max())):
            raise DomainError("covariance must be symmetric")
        if np.linalg.eigvalsh(s).min() < -1e-10 * max(1.0, float(np.trace(s))):
            raise DomainError("covariance must be positive semidefinite")
        if np.isnan(z).any():
            raise DomainError("threshold vector must not contain NaN")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class ProbEstimate:
    value: float
    std_err: float
    samples: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 1.0) or self.std_err < 0.0:
            raise DomainError("probability estimate out of range")


def _floored_cholesky(sigma: np.ndarray) -> np.ndarray:
    """Cholesky factor after symmetrizing and flooring eigenvalues."""
    s = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(s)
    w = np.maximum(w, EIG_FLOOR * max(1.0, float(np.trace(s))))
    return np.linalg.cholesky((v * w) @ v.T)


class _OrthantIntegrator:
    """Evaluator of z -> Pr[N(0, sigma_active) <= z_active], factored once.

    Coordinates where ``active`` is False are treated as unconstrained.  The
    active block is permuted so the largest variance is conditioned first.
    """

    def __init__(self, sigma: np.ndarray, active: np.ndarray, samples: int, seed, randomizations: int):
        if samples < 1000:
            raise DomainError("samples must be >= 1000")
        self.active = active
        self.samples = int(samples)
        self.randomizations = int(randomizations)
        self.dim = int(active.sum())
        if self.dim == 0:
            return
        sub = sigma[np.ix_(active, active)]
        self.order = np.argsort(-np.diag(sub), kind="stable")
        self.chol = _floored_cholesky(sub[np.ix_(self.order, self.order)])
        if self.dim == 1:
            return
        gen = _GEN_1D if self.dim == 2 else _GEN_2D
        shifts = substream(seed).random((self.randomizations, self.dim - 1))
        idx = np.arange(1, self.samples + 1, dtype=float)
        # tent-periodized shifted lattice, one replicate per randomization
        pts = (idx[None, :, None] * gen[None, None, :] + shifts[:, None, :]) % 1.0
        self.x = np.abs(2.0 * pts - 1.0)

    def __call__(self, z: np.ndarray) -> tuple[float, float]:
        if self.dim == 0:
            return 1.0, 0.0
        zz = z[self.active][self.order]
        chol = self.chol
        if self.dim == 1:
            return float(ndtr(zz[0] / chol[0, 0])), 0.0
        e0 = float(ndtr(zz[0] / chol[0, 0]))
        # all randomization replicates in one (R, N) block
        prob = np.full((self.randomizations, self.samples), e0)
        e_prev = prob
        y = np.empty((self.dim - 1, self.randomizations, self.samples))
        for i in range(1, self.dim):
            y[i - 1] = ndtri(np.clip(self.x[:, :, i - 1] * e_prev, _TINY, _ONE_MINUS))
            shift = np.einsum("j,jrn->rn", chol[i, :i], y[:i])
            e_prev = ndtr((zz[i] - shift) / chol[i, i])
            prob = prob * e_prev
        means = prob.mean(axis=1)
        value = float(np.clip(means.mean(), 0.0, 1.0))
        if self.randomizations < 2:
            return value, 0.0
        return value, float(means.std(ddof=1) / math.sqrt(self.randomizations))


def lower_orthant_prob(
    q: OrthantQuery,
    samples: int = 1 << 17,
    seed=0,
    randomizations: int = 8,
) -> ProbEstimate:
    """Estimate ``Pr[N(0, sigma) <= z]`` element-wise.

    ``samples`` lattice points are used per randomization.  Coordinates with
    ``z = +inf`` do not constrain and are dropped; any ``z = -inf`` gives 0.
    Effective dimensions 0 and 1 are evaluated in closed form with zero
    standard error (including the diagonal-covariance factorization, whose
    conditioned integrand is constant).
    """
    total = int(samples) * int(randomizations)
    if np.isneginf(q.z).any():
        return ProbEstimate(0.0, 0.0, total)
    active = ~np.isposinf(q.z)
    value, std_err = _OrthantIntegrator(q.sigma, active, samples, seed, randomizations)(q.z)
    return ProbEstimate(value, std_err, total)


def quantile_set_member(
    eps: float,
    sigma: np.ndarray,
    z: np.ndarray,
    samples: int = 1 << 17,
    seed=0,
) -> bool:
    """Point-estimate membership test ``Pr[N(0, sigma) <= z] >= 1 - eps``."""
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    est = lower_orthant_prob(OrthantQuery(np.asarray(sigma), np.asarray(z)), samples, seed)
    return est.value >= 1.0 - eps


def boundary_scale(
    eps: float,
    sigma: np.ndarray,
    direction: np.ndarray,
    samples: int = 1 << 14,
    seed=0,
    origin: np.ndarray | None = None,
    tol: float = 1e-6,
    bracket_hint: float | None = None,
) -> float:
    """Scale at which a ray crosses the boundary of ``Qinv(eps; sigma)``.

    Without ``origin`` the ray is ``z(t) = t * direction`` with zero entries
    of ``direction`` treated as unconstrained (+inf); the orthant probability
    grows with ``t`` and the smallest scale reaching ``1 - eps`` is returned
    (the scalar quantile ``Qinv(eps)`` in the degenerate one-axis case,
    negative when ``eps > 1/2``).

    With ``origin`` the ray is ``z(t) = origin - t * direction``; the
    probability shrinks with ``t`` and the largest scale still at or above
    ``1 - eps`` is returned (0.0 when the origin itself is already outside).
    """
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or (d < 0).any() or not d.any():
        raise DomainError("direction must be a nonzero, nonnegative 3-vector")
    sigma = np.asarray(sigma, dtype=float)
    query_check = OrthantQuery(sigma, np.zeros(3))  # validates the covariance
    del query_check
    target = 1.0 - eps
    scale = 20.0 * math.sqrt(max(float(np.diag(sigma).max()), EIG_FLOOR))

    if origin is None:
        active = d > 0
        integ = _OrthantIntegrator(sigma, active, samples, seed, 8)

        def gap(t: float) -> float:
            return integ(t * d)[0] - target

        lo, hi = 0.0, scale
        g0 = gap(lo)
        if g0 >= 0.0:
            hi, ghi = lo, g0
            lo = -scale
            for _ in range(64):
                if gap(lo) < 0.0:
                    break
                hi = lo
                lo *= 2.0
            else:
                raise BracketError("no non-member found while expanding downward")
        else:
            for _ in range(64):
                if gap(hi) >= 0.0:
                    break
                lo = hi
                hi *= 2.0
            else:
                raise BracketError("no member found while expanding upward")
        if gap(hi) == 0.0:
            return hi
        return float(brentq(gap, lo, hi, xtol=tol, maxiter=200))

    origin = np.asarray(origin, dtype=float)
    integ = _OrthantIntegrator(sigma, np.ones(3, dtype=bool), samples, seed, 8)

    def gap_from(t: float) -> float:
        return integ(origin - t * d)[0] - target

    if gap_from(0.0) < 0.0:
        return 0.0
    lo, hi = 0.0, bracket_hint if bracket_hint else scale
    for _ in range(64):
        if gap_from(hi) < 0.0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise BracketError("no non-member found while expanding the ray")
    return float(brentq(gap_from, lo, hi, xtol=tol, maxiter=200))
