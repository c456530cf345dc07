"""Closed-form crossing-rate and level-set volume quantities.

The central object is the sphere functional

    F(M) = (c_{d-1} / pi) int_{S^{d-1}} sqrt(v' M v) dS(v),

equal to the Gaussian integral (2 pi)^(-(d+1)/2) int sqrt(z' M z)
exp(-|z|^2/2) dz, where M is the second spectral moment matrix.  The
expected (d-1)-volume of the level set at height u over a compact K is then
vol(K) F(M) exp(-u^2/2), extended by +inf when M has a divergent entry.

The one-dimensional pieces cover the classical crossing rate
(T/pi) sqrt(lambda2) exp(-u^2/2), the two-point regression formulas for the
derivative at a conditioned pair, and the second factorial moment of
crossing counts as a single integral of the pair-density-weighted
conditional expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import ModelError
from .rng import make_rng, STREAM_MC
from .spectral import INF, DirectionalSpectrum, MomentMatrix, SpectralModel, quad

_SQRT2PI = math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _Phi(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)

# sphere quadrature budgets
_CIRCLE_NODES = 4096
_SPHERE_BATCHES = 8
_SPHERE_BATCH_SIZE = 2 ** 11
_SPHERE_SEED = 0x5EED5


def crofton_constant(d: int) -> float:
    """c_{d-1} = Gamma((d+1)/2) / (2 pi^((d-1)/2))."""
    if d < 1:
        raise ModelError("dimension must be >= 1")
    return special.gamma((d + 1) / 2.0) / (2.0 * math.pi ** ((d - 1) / 2.0))


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1}; counting measure (= 2) at d = 1."""
    if d == 1:
        return 2.0
    return 2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0)


def ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0) * radius ** d


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed ball used as the compact observation window K."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if self.radius <= 0:
            raise ModelError("ball radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def volume(self) -> float:
        return ball_volume(self.d, self.radius)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box used as the compact observation window K."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ModelError("box bounds must have equal length")
        if np.any(hi <= lo):
            raise ModelError("box sides must have positive length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    @property
    def sides(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True, eq=False)
class LevelDomain:
    """A level u paired with a compact window K."""

    u: float
    region: object  # Ball or Box

    def __post_init__(self):
        if not isinstance(self.region, (Ball, Box)):
            raise ModelError("region must be a Ball or a Box")

    @property
    def d(self) -> int:
        return self.region.d

    @property
    def lebesgue(self) -> float:
        return self.region.volume


@dataclass(frozen=True)
class RiceValue:
    """A nonnegative expected-value result with its provenance."""

    value: float
    method: str  # 'closed-form' | 'sphere-quadrature' | 'gaussian-mc'
    stderr: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise ModelError("RiceValue entries must be nonnegative")


# ---------------------------------------------------------------------------
# the sphere functional two ways


def _circle_nodes(n: int) -> np.ndarray:
    ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.column_stack([np.cos(ang), np.sin(ang)])


_sphere_cache: dict = {}


def _sphere_batches(d: int):
    """Fixed scrambled low-discrepancy direction sets, 8 batches of 2^11."""
    if d not in _sphere_cache:
        batches = []
        for b in range(_SPHERE_BATCHES):
            eng = stats.qmc.Sobol(d=d, scramble=True, seed=_SPHERE_SEED + b)
            z = special.ndtri(eng.random(_SPHERE_BATCH_SIZE) * (1 - 2e-12) + 1e-12)
            norms = np.linalg.norm(z, axis=1)
            norms[norms == 0] = 1.0
            batches.append(z / norms[:, None])
        _sphere_cache[d] = batches
    return _sphere_cache[d]


def f_lambda2_sphere(m: MomentMatrix) -> RiceValue:
    """F via the surface integral of sqrt(v' M v) over the unit sphere.

    Exact in closed form at d = 1, spectrally accurate trapezoid on the
    circle at d = 2, quasi-uniform direction sets with a batch-spread
    standard error for d >= 3.  Divergent matrices map to +inf.
    """
    d = m.d
    if not m.finite:
        return RiceValue(INF, "sphere-quadrature")
    cd = crofton_constant(d)
    if d == 1:
        return RiceValue(math.sqrt(m.entries[0, 0]) / math.pi, "closed-form")
    if d == 2:
        v = _circle_nodes(_CIRCLE_NODES)
        g = np.sqrt(np.einsum("ni,ij,nj->n", v, m.entries, v))
        value = (cd / math.pi) * 2.0 * math.pi * float(g.mean())
        return RiceValue(value, "sphere-quadrature")
    area = sphere_area(d)
    means = []
    for v in _sphere_batches(d):
        g = np.sqrt(np.einsum("ni,ij,nj->n", v, m.entries, v))
        means.append(float(g.mean()))
    means = np.asarray(means)
    value = (cd / math.pi) * area * float(means.mean())
    stderr = (cd / math.pi) * area * float(means.std(ddof=1)) / math.sqrt(len(means))
    return RiceValue(value, "sphere-quadrature", stderr)


def f_lambda2_mc(m: MomentMatrix, n: int = 10 ** 6, seed: int = 0) -> RiceValue:
    """F as the Monte-Carlo mean of sqrt(Z' M Z) / sqrt(2 pi), Z standard normal."""
    if not m.finite:
        return RiceValue(INF, "gaussian-mc")
    if n < 10 ** 3:
        raise ModelError("Monte-Carlo sample count must be at least 1000")
    rng = make_rng(seed, STREAM_MC)
    d = m.d
    total = 0.0
    total_sq = 0.0
    left = int(n)
    while left > 0:
        chunk = min(left, 1 << 20)
        z = rng.standard_normal((chunk, d))
        vals = np.sqrt(np.einsum("ni,ij,nj->n", z, m.entries, z))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        left -= chunk
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return RiceValue(mean / _SQRT2PI, "gaussian-mc", math.sqrt(var / n) / _SQRT2PI)


def expected_volume(model: SpectralModel, domain: LevelDomain) -> RiceValue:
    """vol(K) F(M) exp(-u^2/2); +inf exactly when M has a divergent entry."""
    if domain.d != model.d:
        raise ModelError("domain and model dimensions differ")
    f = f_lambda2_sphere(model.lambda2_matrix())
    damp = math.exp(-domain.u ** 2 / 2.0)
    if math.isinf(f.value):
        return RiceValue(INF, f.method)
    scale = domain.lebesgue * damp
    return RiceValue(scale * f.value, f.method, scale * f.stderr)


def expected_crossings_1d(lam2: float, u: float, T: float) -> float:
    """(T/pi) sqrt(lambda2) exp(-u^2/2); +inf iff lambda2 is infinite."""
    if T <= 0:
        raise ModelError("interval length must be positive")
    if math.isinf(lam2):
        return INF
    if lam2 < 0:
        raise ModelError("lambda2 must be nonnegative")
    return (T / math.pi) * math.sqrt(lam2) * math.exp(-u * u / 2.0)


# ---------------------------------------------------------------------------
# two-point conditional pieces


def conditional_mean_derivative(spec: DirectionalSpectrum, tau: float, u: float) -> float:
    """E(X'(0) | X(0) = X(tau) = u) = -r'(tau) u / (1 + r(tau)).

    The same conditional mean at the other endpoint is the negative.
    """
    if tau <= 0:
        raise ModelError("tau must be positive")
    r = float(spec.cov(tau))
    if abs(1.0 + r) < 1e-14:
        raise ModelError("degenerate pair: r(tau) = -1")
    return -float(spec.dcov(tau)) * u / (1.0 + r)


def conditional_variance_derivative(spec: DirectionalSpectrum, tau: float) -> float:
    """Var(X'(0) | X(0) = X(tau) = u) = lambda2 - r'(tau)^2 / (1 - r(tau)^2).

    Free of u; nonnegative for every valid covariance.
    """
    if tau <= 0:
        raise ModelError("tau must be positive")
    lam2 = spec.lambda2
    if math.isinf(lam2):
        raise ModelError("conditional variance undefined: infinite lambda2")
    dd = float(spec.cov_deficit(tau))
    one_minus_r2 = dd * (2.0 - dd)
    if one_minus_r2 <= 0.0:
        raise ModelError("degenerate pair: |r(tau)| = 1")
    rp = float(spec.dcov(tau))
    return lam2 - rp * rp / one_minus_r2


def _pair_conditional(spec: DirectionalSpectrum, tau: float, u: float):
    """Means, covariance and joint density factor of (X'(0), X'(tau)) given
    X(0) = X(tau) = u."""
    lam2 = spec.lambda2
    r = float(spec.cov(tau))
    rp = float(spec.dcov(tau))
    rpp = float(spec.ddcov(tau))
    dd = float(spec.cov_deficit(tau))
    one_minus_r2 = dd * (2.0 - dd)
    if one_minus_r2 <= 0.0:
        return None
    m1 = -rp * u / (1.0 + r)
    s2 = lam2 - rp * rp / one_minus_r2
    c12 = -rpp - r * rp * rp / one_minus_r2
    density = math.exp(-u * u / (1.0 + r)) / (2.0 * math.pi * math.sqrt(one_minus_r2))
    return m1, -m1, max(s2, 0.0), c12, density


def _truncated_mean_positive(a: float, s: float) -> float:
    """E[max(W, 0)] for W ~ N(a, s^2)."""
    if s <= 0.0:
        return max(a, 0.0)
    z = a / s
    return a * _Phi(z) + s * _phi(z)


def _truncated_mean_abs(a: float, s: float) -> float:
    """E[|W|] for W ~ N(a, s^2)."""
    if s <= 0.0:
        return abs(a)
    z = a / s
    return a * (2.0 * _Phi(z) - 1.0) + 2.0 * s * _phi(z)


def bivariate_positive_part_mean(m1: float, m2: float, s2: float, c12: float,
                                 mode: str = "up") -> float:
    """E[Y1+ Y2+] ('up') or E[|Y1 Y2|] ('all') for a bivariate normal pair
    with means (m1, m2) and covariance [[s2, c12], [c12, s2]].

    Tensor quadrature over the pair, with the inner conditional integral in
    closed form: conditionally on Y2 = y, Y1 is normal with mean
    m1 + (c12/s2)(y - m2) and variance s2 - c12^2/s2.
    """
    if s2 <= 0.0:
        if mode == "up":
            return max(m1, 0.0) * max(m2, 0.0)
        return abs(m1) * abs(m2)
    s = math.sqrt(s2)
    rho = min(max(c12 / s2, -1.0), 1.0)
    sbar = s * math.sqrt(max(1.0 - rho * rho, 0.0))

    if mode == "up":
        def f(z):
            y = m2 + s * z
            a = m1 + rho * (y - m2)
            return y * _truncated_mean_positive(a, sbar) * _phi(z)

        z0 = -m2 / s
        return quad(f, z0, z0 + 40.0, limit=200)
    if mode == "all":
        def f(z):
            y = m2 + s * z
            a = m1 + rho * (y - m2)
            return abs(y) * _truncated_mean_abs(a, sbar) * _phi(z)

        z0 = -m2 / s
        lo = quad(f, z0 - 40.0, z0, limit=200)
        hi = quad(f, z0, z0 + 40.0, limit=200)
        return lo + hi
    raise ModelError(f"unknown mode {mode!r}")


def centered_abs_product_mean(s2: float, rho: float) -> float:
    """E|Y1 Y2| for a centered bivariate normal with common variance s2 and
    correlation rho: (2/pi) (sqrt(1-rho^2) + rho asin rho) s2."""
    rho = min(max(rho, -1.0), 1.0)
    return 2.0 / math.pi * (math.sqrt(1.0 - rho * rho) + rho * math.asin(rho)) * s2


def pair_rate_density(spec: DirectionalSpectrum, tau: float, u: float,
                      mode: str = "up") -> float:
    """J(tau): conditional positive-part expectation of the derivative pair
    times the joint density of (X(0), X(tau)) at (u, u)."""
    pc = _pair_conditional(spec, tau, u)
    if pc is None:
        raise ModelError("degenerate pair: |r(tau)| = 1")
    m1, m2, s2, c12, density = pc
    return bivariate_positive_part_mean(m1, m2, s2, c12, mode) * density


def second_factorial_moment_1d(spec: DirectionalSpectrum, u: float, T: float,
                               mode: str = "up") -> float:
    """E[N(N-1)] over an interval of length T for up-crossings ('up') or all
    crossings ('all') of level u, as 2 int_0^T (T - tau) J(tau) dtau.

    Requires a finite directional second moment and a nondegenerate
    conditional derivative pair on the interior of (0, T].
    """
    if T <= 0:
        raise ModelError("interval length must be positive")
    lam2 = spec.lambda2
    if math.isinf(lam2):
        raise ModelError("second factorial moment undefined: infinite lambda2")
    if mode not in ("up", "all"):
        raise ModelError(f"unknown mode {mode!r}")

    # a conditional pair that is singular across the bulk of the interval
    # means the whole path is pinned by the conditioning; the density-weighted
    # integral is then blind to the crossing pairs and must be refused
    probes = np.array([0.30, 0.45, 0.60, 0.75, 0.90]) * T
    degenerate = 0
    for tp in probes:
        pc = _pair_conditional(spec, float(tp), u)
        if pc is None or pc[2] <= 1e-10 * lam2:
            degenerate += 1
    if degenerate >= 3:
        raise ModelError(
            "singular conditional covariance: the derivative pair is a.s. "
            "determined by the conditioning on most of the interval")

    def j(tau: float) -> float:
        pc = _pair_conditional(spec, tau, u)
        if pc is None:
            return 0.0
        m1, m2, s2, c12, density = pc
        return bivariate_positive_part_mean(m1, m2, s2, c12, mode) * density

    scale = math.sqrt(lam2)
    tau_c = min(0.5 / scale, T / 2.0)
    # log substitution resolves the integrable concentration near tau = 0
    head = quad(lambda s: (T - math.exp(s)) * j(math.exp(s)) * math.exp(s),
                math.log(tau_c) - 25.0, math.log(tau_c), limit=300)
    body = quad(lambda t: (T - t) * j(t), tau_c, T, limit=300)
    return 2.0 * (head + body)
