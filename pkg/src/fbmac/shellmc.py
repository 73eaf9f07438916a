"""Power-shell sampling, modified information densities, and numeric checks.

Inputs drawn uniformly on the power shell ``||x||^2 = n p`` are realized by
normalizing an i.i.d. Gaussian vector.  With reference output laws chosen as
the capacity-achieving Gaussians, the modified information densities reduce
to quadratic forms in a handful of inner products:

    p2p:  i  = n C(p)  + [p  (n - ||z||^2) + 2 <x, z>] / (2 (1 + p))
    mac:  i1 = n C(p1) + [p1 (n - ||z||^2) + 2 <x1, z>] / (2 (1 + p1))
          i2 = n C(p2) + [p2 (n - ||z||^2) + 2 <x2, z>] / (2 (1 + p2))
          i3 = n C(ps) + [ps (n - ||z||^2) + 2 <x1, x2> + 2 <x1, z>
                          + 2 <x2, z>] / (2 (1 + ps)),   ps = p1 + p2.

Two samplers produce these densities under the channel law.  The ``direct``
method materializes the Gaussian vectors and serves as the oracle; the
``reduced`` method draws the joint law of the required inner products exactly
(by rotational invariance they depend on a few chi-square and normal scalars
only), which makes 1e7-trial runs cheap at any blocklength.  Tests verify the
two methods agree in distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr

from ._rng import chunk_sizes, substream, thread_map
from .core import DomainError, PowerPair, capacity, dispersion
from .gaussquad import ProbEstimate

_CHUNK = 1 << 16
_DIRECT_BUDGET = 1 << 25  # scalars per direct-method chunk


@dataclass(frozen=True, eq=False)
class ShellSample:
    """A point on the power shell ||x||^2 = n p."""

    n: int
    p: float
    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"expected a vector of length {self.n}")
        target = self.n * self.p
        if abs(float(x @ x) - target) > 1e-9 * target:
            raise DomainError("sample violates the exact power constraint")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class InfoDensityVector:
    """One draw of the three modified information densities (nats)."""

    i1: float
    i2: float
    i3: float

    def __post_init__(self) -> None:
        if not all(map(math.isfinite, (self.i1, self.i2, self.i3))):
            raise DomainError("information densities must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.i1, self.i2, self.i3])


@dataclass(frozen=True, eq=False)
class KsReport:
    """Gaussian-approximation check of a normalized-sum functional."""

    n: int
    trials: int
    ks_distance: float
    target_mean: np.ndarray
    target_cov: np.ndarray
    cov_rel_err: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.ks_distance <= 1.0):
            raise DomainError("KS distance must lie in [0, 1]")


@dataclass(frozen=True)
class OutageEstimate:
    value: float
    std_err: float
    trials: int
    ci95_low: float
    ci95_high: float


@dataclass(frozen=True)
class ExtremeReport:
    """Maximum of a divergence-bound function and where it occurs."""

    max_value: float
    argmax: float
    constants: dict


@dataclass(frozen=True)
class BesselBoundReport:
    holds: bool
    log_lhs: float
    log_rhs: float


def sample_shell(n: int, p: float, rng: np.random.Generator) -> ShellSample:
    """Uniform draw on the shell ||x||^2 = n p (normalized Gaussian vector)."""
    if n < 1 or p <= 0:
        raise DomainError("need n >= 1 and p > 0")
    w = rng.standard_normal(n)
    norm = float(np.linalg.norm(w))
    while norm < 1e-300:  # probability-zero guard
        w = rng.standard_normal(n)
        norm = float(np.linalg.norm(w))
    return ShellSample(n, p, math.sqrt(n * p) * w / norm)


def info_density_p2p(x: ShellSample, z: np.ndarray) -> float:
    """Modified information density of one (codeword, noise) draw, in nats."""
    z = np.asarray(z, dtype=float)
    if z.shape != (x.n,):
        raise DomainError("noise vector dimension mismatch")
    n, p = x.n, x.p
    return n * capacity(p) + (p * (n - float(z @ z)) + 2.0 * float(x.x @ z)) / (2.0 * (1.0 + p))


def info_density_vector_mac(
    x1: ShellSample, x2: ShellSample, z: np.ndarray, pp: PowerPair | None = None
) -> InfoDensityVector:
    """The three modified information densities of one MAC draw, in nats."""
    z = np.asarray(z, dtype=float)
    if x1.n != x2.n or z.shape != (x1.n,):
        raise DomainError("dimension mismatch between codewords and noise")
    if pp is not None and (pp.p1 != x1.p or pp.p2 != x2.p):
        raise DomainError("PowerPair disagrees with the shell samples")
    n = x1.n
    p1, p2 = x1.p, x2.p
    ps = p1 + p2
    zsq = float(z @ z)
    x1z = float(x1.x @ z)
    x2z = float(x2.x @ z)
    x12 = float(x1.x @ x2.x)
    i1 = n * capacity(p1) + (p1 * (n - zsq) + 2.0 * x1z) / (2.0 * (1.0 + p1))
    i2 = n * capacity(p2) + (p2 * (n - zsq) + 2.0 * x2z) / (2.0 * (1.0 + p2))
    i3 = n * capacity(ps) + (ps * (n - zsq) + 2.0 * (x12 + x1z + x2z)) / (2.0 * (1.0 + ps))
    return InfoDensityVector(i1, i2, i3)


# ---------------------------------------------------------------------------
# vectorized samplers for the density laws
# ---------------------------------------------------------------------------


def _p2p_stats_reduced(n: int, p: float, m: int, rng: np.random.Generator):
    """Joint law of (||z||^2, <x, z>) for a shell input; exact in distribution.

    By rotational invariance only the noise component along the codeword
    direction matters: g ~ N(0,1), ||z||^2 = g^2 + chi2(n-1).
    """
    g = rng.standard_normal(m)
    h = rng.chisquare(n - 1, m)
    zsq = g * g + h
    xz = math.sqrt(n * p) * g
    return zsq, xz


def _p2p_stats_direct(n: int, p: float, m: int, rng: np.random.Generator):
    w = rng.standard_normal((m, n))
    z = rng.standard_normal((m, n))
    x = math.sqrt(n * p) * w / np.linalg.norm(w, axis=1, keepdims=True)
    return np.einsum("ij,ij->i", z, z), np.einsum("ij,ij->i", x, z)


def p2p_density_samples(n: int, p: float, trials: int, seed=0, method: str = "reduced") -> np.ndarray:
    """Draws of the p2p modified information density under the channel law."""
    if n < 2:
        raise DomainError("need n >= 2")
    stats = _p2p_stats_reduced if method == "reduced" else _p2p_stats_direct
    chunk = _CHUNK if method == "reduced" else max(1, _DIRECT_BUDGET // (2 * n))

    def run(item):
        idx, m = item
        zsq, xz = stats(n, p, m, substream(seed, idx))
        return n * capacity(p) + (p * (n - zsq) + 2.0 * xz) / (2.0 * (1.0 + p))

    parts = thread_map(run, enumerate(chunk_sizes(trials, chunk)))
    return np.concatenate(parts) if parts else np.empty(0)


def _mac_stats_reduced(n: int, p1: float, p2: float, m: int, rng: np.random.Generator):
    """Joint law of (||z||^2, <x1,z>, <x2,z>, <x1,x2>); exact in distribution.

    Coordinates: g2 = component of w2 along w1, h2 = squared residual norm;
    z1, z2 = noise components along w1 and the w2 residual, hz the rest.
    """
    g2 = rng.standard_normal(m)
    h2 = rng.chisquare(n - 1, m)
    z1 = rng.standard_normal(m)
    z2 = rng.standard_normal(m)
    hz = rng.chisquare(n - 2, m)
    w2norm = np.sqrt(g2 * g2 + h2)
    zsq = z1 * z1 + z2 * z2 + hz
    x1z = math.sqrt(n * p1) * z1
    x2z = math.sqrt(n * p2) * (g2 * z1 + np.sqrt(h2) * z2) / w2norm
    x12 = n * math.sqrt(p1 * p2) * g2 / w2norm
    return zsq, x1z, x2z, x12


def _mac_stats_direct(n: int, p1: float, p2: float, m: int, rng: np.random.Generator):
    w1 = rng.standard_normal((m, n))
    w2 = rng.standard_normal((m, n))
    z = rng.standard_normal((m, n))
    x1 = math.sqrt(n * p1) * w1 / np.linalg.norm(w1, axis=1, keepdims=True)
    x2 = math.sqrt(n * p2) * w2 / np.linalg.norm(w2, axis=1, keepdims=True)
    return (
        np.einsum("ij,ij->i", z, z),
        np.einsum("ij,ij->i", x1, z),
        np.einsum("ij,ij->i", x2, z),
        np.einsum("ij,ij->i", x1, x2),
    )


def mac_density_samples(
    n: int, pp: PowerPair, trials: int, seed=0, method: str = "reduced"
) -> np.ndarray:
    """(3, trials) draws of the MAC density vector under the channel law."""
    if n < 3:
        raise DomainError("need n >= 3")
    p1, p2 = pp.p1, pp.p2
    ps = p1 + p2
    stats = _mac_stats_reduced if method == "reduced" else _mac_stats_direct
    chunk = _CHUNK if method == "reduced" else max(1, _DIRECT_BUDGET // (3 * n))
    c1, c2, c3 = n * capacity(p1), n * capacity(p2), n * capacity(ps)

    def run(item):
        idx, m = item
        zsq, x1z, x2z, x12 = stats(n, p1, p2, m, substream(seed, idx))
        i1 = c1 + (p1 * (n - zsq) + 2.0 * x1z) / (2.0 * (1.0 + p1))
        i2 = c2 + (p2 * (n - zsq) + 2.0 * x2z) / (2.0 * (1.0 + p2))
        i3 = c3 + (ps * (n - zsq) + 2.0 * (x12 + x1z + x2z)) / (2.0 * (1.0 + ps))
        return np.stack([i1, i2, i3])

    parts = thread_map(run, enumerate(chunk_sizes(trials, chunk)))
    return np.concatenate(parts, axis=1) if parts else np.empty((3, 0))


def _wilson_ci(k: int, n: int) -> tuple[float, float]:
    z = 1.959963984540054
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def empirical_outage_p2p(
    n: int, p: float, log_threshold: float, trials: int, seed=0, method: str = "reduced"
) -> OutageEstimate:
    """Fraction of density draws at or below the threshold, with Wilson CI."""
    if trials < 1000:
        raise DomainError("trials must be >= 1000")
    if math.isnan(log_threshold):
        raise DomainError("threshold must not be NaN")
    stats = _p2p_stats_reduced if method == "reduced" else _p2p_stats_direct
    chunk = _CHUNK if method == "reduced" else max(1, _DIRECT_BUDGET // (2 * n))
    cterm = n * capacity(p)

    def run(item):
        idx, m = item
        zsq, xz = stats(n, p, m, substream(seed, idx))
        it = cterm + (p * (n - zsq) + 2.0 * xz) / (2.0 * (1.0 + p))
        return int(np.count_nonzero(it <= log_threshold))

    hits = sum(thread_map(run, enumerate(chunk_sizes(trials, chunk))))
    phat = hits / trials
    lo, hi = _wilson_ci(hits, trials)
    return OutageEstimate(phat, math.sqrt(max(phat * (1 - phat), 1e-300) / trials), trials, lo, hi)


# ---------------------------------------------------------------------------
# CLT-for-functions check
# ---------------------------------------------------------------------------


def f_p2p(u: np.ndarray, p: float) -> float:
    """Scalar functional of the 3-vector normalized sum (p2p construction)."""
    u = np.asarray(u, dtype=float)
    return float(p * u[0] + 2.0 * u[1] / math.sqrt(1.0 + u[2]))


def f_mac(u: np.ndarray, pp: PowerPair) -> np.ndarray:
    """3-vector functional of the 6-vector normalized sum (MAC construction)."""
    u = np.asarray(u, dtype=float)
    p1, p2 = pp.p1, pp.p2
    s5 = math.sqrt(1.0 + u[4])
    s6 = math.sqrt(1.0 + u[5])
    f1 = p1 * u[0] + 2.0 * u[1] / s5
    f2 = p2 * u[0] + 2.0 * u[2] / s6
    f3 = (p1 + p2) * u[0] + 2.0 * u[1] / s5 + 2.0 * u[2] / s6 + 2.0 * u[3] / (s5 * s6)
    return np.array([f1, f2, f3])


def clt_target_cov_p2p(n: int, p: float) -> float:
    """J Cov(U) J^T / n for the scalar p2p functional."""
    return 2.0 * p * (p + 2.0) / n


def clt_target_cov_mac(n: int, pp: PowerPair) -> np.ndarray:
    """J Cov(U) J^T / n for the MAC functional (literal 3x6 Jacobian)."""
    p1, p2 = pp.p1, pp.p2
    ps = p1 + p2
    jac = np.array(
        [
            [p1, 2.0, 0.0, 0.0, 0.0, 0.0],
            [p2, 0.0, 2.0, 0.0, 0.0, 0.0],
            [ps, 2.0, 2.0, 2.0, 0.0, 0.0],
        ]
    )
    cov_u = np.diag([2.0, p1, p2, p1 * p2, 2.0, 2.0])
    return jac @ cov_u @ jac.T / n


def _ks_distance(samples: np.ndarray, sigma: float) -> float:
    xs = np.sort(samples)
    cdf = ndtr(xs / sigma)
    k = xs.size
    grid = np.arange(1, k + 1) / k
    return float(max((grid - cdf).max(), (cdf - grid + 1.0 / k).max()))


def _f_samples_p2p(n: int, p: float, trials: int, seed, method: str) -> np.ndarray:
    stats = _p2p_stats_reduced if method == "reduced" else _p2p_stats_direct
    chunk = _CHUNK if method == "reduced" else max(1, _DIRECT_BUDGET // (2 * n))

    def run(item):
        idx, m = item
        zsq, xz = stats(n, p, m, substream(seed, idx))
        return (p * (n - zsq) + 2.0 * xz) / n

    return np.concatenate(thread_map(run, enumerate(chunk_sizes(trials, chunk))))


def _f_samples_mac(n: int, pp: PowerPair, trials: int, seed, method: str) -> np.ndarray:
    p1, p2 = pp.p1, pp.p2
    ps = p1 + p2
    stats = _mac_stats_reduced if method == "reduced" else _mac_stats_direct
    chunk = _CHUNK if method == "reduced" else max(1, _DIRECT_BUDGET // (3 * n))

    def run(item):
        idx, m = item
        zsq, x1z, x2z, x12 = stats(n, p1, p2, m, substream(seed, idx))
        f1 = (p1 * (n - zsq) + 2.0 * x1z) / n
        f2 = (p2 * (n - zsq) + 2.0 * x2z) / n
        f3 = (ps * (n - zsq) + 2.0 * (x12 + x1z + x2z)) / n
        return np.stack([f1, f2, f3])

    return np.concatenate(thread_map(run, enumerate(chunk_sizes(trials, chunk))), axis=1)


def clt_function_check(
    case: str,
    n: int,
    trials: int,
    seed=0,
    p: float = 1.0,
    pp: PowerPair | None = None,
    method: str = "reduced",
) -> KsReport:
    """Compare the normalized-sum functional against its Gaussian limit.

    ``case='p2p'`` uses the scalar functional and reports its KS distance to
    N(0, 2p(p+2)/n).  ``case='mac-joint'`` uses the 3-vector functional and
    reports the worst KS distance over the three margins together with the
    relative Frobenius error of the empirical covariance.
    """
    if n < 16:
        raise DomainError("need n >= 16")
    if case == "p2p":
        vals = _f_samples_p2p(n, p, trials, seed, method)
        var = clt_target_cov_p2p(n, p)
        ks = _ks_distance(vals, math.sqrt(var))
        return KsReport(n, trials, ks, np.zeros(1), np.array([[var]]))
    if case == "mac-joint":
        pp = pp if pp is not None else PowerPair(1.0, 1.0)
        vals = _f_samples_mac(n, pp, trials, seed, method)
        target = clt_target_cov_mac(n, pp)
        ks = max(_ks_distance(vals[i], math.sqrt(target[i, i])) for i in range(3))
        emp = np.cov(vals)
        rel = float(np.linalg.norm(emp - target) / np.linalg.norm(target))
        return KsReport(n, trials, ks, np.zeros(3), target, rel)
    raise DomainError(f"unknown case {case!r}")


# ---------------------------------------------------------------------------
# divergence-bound functions (uniform Radon-Nikodym constants)
# ---------------------------------------------------------------------------


def rn_bound_function_p2p(t: float, p: float) -> float:
    """Log divergence-bound profile for the shell-input output law; <= 0 on t > 0."""
    if t <= 0:
        raise DomainError("t must be positive")
    root = math.sqrt(1.0 + 4.0 * p * t)
    return (
        math.log(2.0 * (1.0 + p)) - (1.0 + p) - p * t / (1.0 + p) + root - math.log1p(root)
    )


def rn_bound_function_mac(t: float, p1: float, p2: float) -> float:
    """Log divergence-bound profile for the superimposed-input law.

    Defined on the open interval ((sqrt(p1)-sqrt(p2))^2, (sqrt(p1)+sqrt(p2))^2);
    -inf outside.
    """
    lo = (math.sqrt(p1) - math.sqrt(p2)) ** 2
    hi = (math.sqrt(p1) + math.sqrt(p2)) ** 2
    if not (lo < t < hi):
        return -math.inf
    ps = p1 + p2
    cos0_sq = (t + p1 - p2) ** 2 / (4.0 * p1 * t)
    if cos0_sq >= 1.0:
        return -math.inf
    return math.log(ps / (math.e * p2)) + t / ps + math.log1p(-cos0_sq)


def _golden_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return fn(x), x


def rn_bound_p2p_check(p: float, t_grid_resolution: int = 4096) -> ExtremeReport:
    """Maximize the p2p divergence-bound profile over (0, 20(1+p)].

    Reports the realized uniform constants alongside: the large-n constant
    uses c_gamma = ln sqrt(2 pi) (giving a bound <= 1), the finite-n variant
    uses c_gamma = 2.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    hi = 20.0 * (1.0 + p)
    grid = np.linspace(hi / t_grid_resolution, hi, t_grid_resolution)
    vals = np.array([rn_bound_function_p2p(t, p) for t in grid])
    k = int(vals.argmax())
    lo_b = grid[max(k - 1, 0)]
    hi_b = grid[min(k + 1, t_grid_resolution - 1)]
    fmax, argmax = _golden_max(lambda t: rn_bound_function_p2p(t, p), lo_b, hi_b, 1e-9 * (1.0 + p))
    c_asym = math.log(0.5) + math.log(math.sqrt(2.0 * math.pi)) + math.log(math.sqrt(math.pi / 8.0))
    c_fin = math.log(0.5) + 2.0 + math.log(math.sqrt(math.pi / 8.0))
    constants = {
        "k_asymptotic": math.exp(c_asym),
        "k_finite_n": math.exp(c_fin),
    }
    return ExtremeReport(fmax, argmax, constants)


def rn_bound_mac_check(pp: PowerPair, t_grid_resolution: int = 4096) -> ExtremeReport:
    """Maximize the MAC divergence-bound profile over its open interval.

    Also reports the sum-density uniform constant K3 = e^{c_gamma} p2 /
    sqrt(2 pi p1) for the finite-n choice c_gamma = 2 and the asymptotic
    choice c_gamma = ln sqrt(2 pi).
    """
    p1, p2 = pp.p1, pp.p2
    lo = (math.sqrt(p1) - math.sqrt(p2)) ** 2
    hi = (math.sqrt(p1) + math.sqrt(p2)) ** 2
    width = hi - lo
    inset = 1e-9 * width
    grid = np.linspace(lo + inset, hi - inset, t_grid_resolution)
    vals = np.array([rn_bound_function_mac(t, p1, p2) for t in grid])
    k = int(vals.argmax())
    lo_b = grid[max(k - 1, 0)]
    hi_b = grid[min(k + 1, t_grid_resolution - 1)]
    fmax, argmax = _golden_max(lambda t: rn_bound_function_mac(t, p1, p2), lo_b, hi_b, 1e-9 * width)
    constants = {
        "k3_finite_n": math.exp(2.0) * p2 / math.sqrt(2.0 * math.pi * p1),
        "k3_asymptotic": p2 / math.sqrt(p1),
    }
    return ExtremeReport(fmax, argmax, constants)


# ---------------------------------------------------------------------------
# log-domain modified Bessel function of the first kind
# ---------------------------------------------------------------------------


def _log_bessel_series(k: float, z: float) -> float:
    lz = math.log(0.5 * z)
    peak = 0.5 * (-(k + 1.0) + math.sqrt((k + 1.0) ** 2 + z * z))
    mmax = int(peak + 12.0 * math.sqrt(peak + 4.0) + 24.0)
    m = np.arange(mmax + 1, dtype=float)
    logs = (k + 2.0 * m) * lz - gammaln(m + 1.0) - gammaln(m + k + 1.0)
    top = logs.max()
    return float(top + math.log(np.exp(logs - top).sum()))


def _log_bessel_uniform(k: float, z: float) -> float:
    # Olver's large-order expansion, uniformly valid in z; three correction terms
    x = z / k
    s = math.hypot(1.0, x)
    eta = s + math.log(x / (1.0 + s))
    t = 1.0 / s
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) / 414720.0
    corr = 1.0 + u1 / k + u2 / (k * k) + u3 / (k * k * k)
    return k * eta - 0.5 * math.log(2.0 * math.pi * k) - 0.25 * math.log1p(x * x) + math.log(corr)


def _log_bessel_large_z(k: float, z: float) -> float:
    mu = 4.0 * k * k
    term, total = 1.0, 1.0
    for m in range(1, 16):
        term *= -(mu - (2.0 * m - 1.0) ** 2) / (m * 8.0 * z)
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return z - 0.5 * math.log(2.0 * math.pi * z) + math.log(total)


def log_bessel_i(k: float, z: float) -> float:
    """ln I_k(z) for real order k >= 0 and z >= 0, safe at any magnitude."""
    k = float(k)
    z = float(z)
    if k < 0 or z < 0 or math.isnan(k) or math.isnan(z):
        raise DomainError("need k >= 0 and z >= 0")
    if z == 0.0:
        return 0.0 if k == 0.0 else -math.inf
    if k >= 16.0:
        return _log_bessel_uniform(k, z)
    if z <= 400.0:
        return _log_bessel_series(k, z)
    return _log_bessel_large_z(k, z)


def bessel_ratio_bound_check(k: float, z: float) -> BesselBoundReport:
    """Check z^{-k} I_k(z) <= sqrt(pi/8) (k^2+z^2)^{-1/4} (k+sqrt(k^2+z^2))^{-k} e^{sqrt(k^2+z^2)}."""
    if z <= 0:
        raise DomainError("z must be positive")
    log_lhs = log_bessel_i(k, z) - k * math.log(z)
    root = math.hypot(k, z)
    log_rhs = (
        0.5 * math.log(math.pi / 8.0)
        - 0.5 * math.log(root)
        - k * math.log(k + root)
        + root
    )
    return BesselBoundReport(log_lhs <= log_rhs, log_lhs, log_rhs)


def shell_output_logpdf(y_norm_sq: float, n: int, p: float) -> float:
    """Log density of the output law induced by a shell input, at ||y||^2 given.

    Bessel closed form; depends on y only through its norm.
    """
    if y_norm_sq <= 0 or n < 2 or p <= 0:
        raise DomainError("need ||y||^2 > 0, n >= 2, p > 0")
    w = math.sqrt(y_norm_sq * n * p)
    order = 0.5 * n - 1.0
    return (
        -math.log(2.0)
        - 0.5 * n * math.log(math.pi)
        + gammaln(0.5 * n)
        - 0.5 * n * p
        - 0.5 * y_norm_sq
        + log_bessel_i(order, w)
        - order * math.log(w)
    )


# ---------------------------------------------------------------------------
# superimposed-input density on the hollow sphere
# ---------------------------------------------------------------------------


def sum_density(t: float, n: int, pp: PowerPair) -> float:
    """Log point density of x1 + x2 at squared norm n*t; -inf off the hollow sphere.

    The support is the open interval (sqrt(p1)-sqrt(p2))^2 < t <
    (sqrt(p1)+sqrt(p2))^2; both boundary shells carry zero probability and
    return -inf.
    """
    if n < 4:
        raise DomainError("need n >= 4")
    p1, p2 = pp.p1, pp.p2
    lo = (math.sqrt(p1) - math.sqrt(p2)) ** 2
    hi = (math.sqrt(p1) + math.sqrt(p2)) ** 2
    if not (lo < t < hi):
        return -math.inf
    cos0_sq = (t + p1 - p2) ** 2 / (4.0 * p1 * t)
    if cos0_sq >= 1.0:
        return -math.inf
    return (
        0.5 * math.log(p2 / (math.pi * p1))
        + 2.0 * gammaln(0.5 * n)
        - gammaln(0.5 * (n - 1))
        - math.log(2.0)
        - 0.5 * n * math.log(math.pi)
        - 0.5 * (n - 1) * math.log(n * p2)
        - 0.5 * math.log(n * t)
        + 0.5 * (n - 3) * math.log1p(-cos0_sq)
    )


def sum_inner_product_samples(n: int, pp: PowerPair, trials: int, seed=0) -> np.ndarray:
    """Draws of ||x1 + x2||^2 / n for independent shell inputs."""

    def run(item):
        idx, m = item
        rng = substream(seed, idx)
        g2 = rng.standard_normal(m)
        h2 = rng.chisquare(n - 1, m)
        x12 = n * math.sqrt(pp.p1 * pp.p2) * g2 / np.sqrt(g2 * g2 + h2)
        return pp.p1 + pp.p2 + 2.0 * x12 / n

    return np.concatenate(thread_map(run, enumerate(chunk_sizes(trials, _CHUNK))))


# ---------------------------------------------------------------------------
# confusion probabilities under the reference measure
# ---------------------------------------------------------------------------


def importance_weights(it: np.ndarray, log_gamma: float) -> np.ndarray:
    """Per-draw terms e^{-i} 1{i > log_gamma} of the reference-tail estimator.

    On the selected set e^{-i} <= e^{-log_gamma}, so the clip only guards the
    absurd regime log_gamma < -709.
    """
    return np.where(it > log_gamma, np.exp(np.clip(-it, -745.0, 709.0)), 0.0)


def p2p_confusion_importance(
    n: int, p: float, log_gamma: float, trials: int, seed=0
) -> ProbEstimate:
    """Reference-measure tail Pr_Q[i > log_gamma] via channel-law reweighting.

    Uses E_P[e^{-i} 1{i > log_gamma}]; the channel law puts most draws above
    the threshold, so rare reference-measure events are resolved at any n.
    """
    w = importance_weights(p2p_density_samples(n, p, trials, seed), log_gamma)
    return ProbEstimate(
        min(float(w.mean()), 1.0), float(w.std(ddof=1) / math.sqrt(trials)), trials
    )


def p2p_confusion_direct(n: int, p: float, log_gamma: float, trials: int, seed=0) -> ProbEstimate:
    """Reference-measure tail by sampling y from the reference law directly."""

    def run(item):
        idx, m = item
        rng = substream(seed, idx)
        g = rng.standard_normal(m)
        h = rng.chisquare(n - 1, m)
        ysq = (1.0 + p) * (g * g + h)
        xy = math.sqrt(n * p * (1.0 + p)) * g
        it = n * capacity(p) - 0.5 * p * (g * g + h) + xy - 0.5 * n * p
        return int(np.count_nonzero(it > log_gamma))

    hits = sum(thread_map(run, enumerate(chunk_sizes(trials, _CHUNK))))
    phat = hits / trials
    return ProbEstimate(phat, math.sqrt(max(phat * (1 - phat), 1e-300) / trials), trials)


@dataclass(frozen=True)
class ConfusionScalePoint:
    n: int
    value: float
    std_err: float


def confusion_scaling_check(n_list, p: float, seed=0, trials: int = 1 << 17) -> list[ConfusionScalePoint]:
    """gamma_n * Pr_Q[i > ln gamma_n] at ln gamma_n = nC - sqrt(nV); ~ n^{-1/2}.

    Computed entirely with bounded reweighted terms e^{ln gamma - i}, so no
    under/overflow at any blocklength.
    """
    out = []
    for j, n in enumerate(n_list):
        lg = n * capacity(p) - math.sqrt(n * dispersion(p))
        it = p2p_density_samples(int(n), p, trials, (seed, j))
        contrib = np.where(it > lg, np.exp(np.clip(lg - it, -745.0, 0.0)), 0.0)
        out.append(
            ConfusionScalePoint(
                int(n), float(contrib.mean()), float(contrib.std(ddof=1) / math.sqrt(trials))
            )
        )
    return out
