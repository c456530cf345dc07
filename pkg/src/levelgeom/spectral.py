"""Stationary unit-variance Gaussian spectral models and their analytic moments.

Each model pairs a covariance function r(t) on R^d with the matching symmetric
spectral probability measure F.  The catalog exposes, in closed form or by
deterministic quadrature: covariances, the second spectral moment matrix and
its finite-direction subspace, directional second moments, absolute spectral
moments of order 2+delta, the curvature-excess function
theta_v(tau) = r_v(tau) - 1 + lambda2_v tau^2 / 2, and the integral of
2 theta_v'(tau) / tau^2 that controls second crossing moments.

Divergent moments are reported as ``math.inf``; they are never approximated
by large finite floats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special, stats

from .errors import ModelError, NumericalError

INF = math.inf

_UNIT_TOL = 1e-9


def quad(f, a, b, **kw):
    """Adaptive quadrature with the endpoint-noise warnings muted; every
    integral routed through here is pinned by an independent oracle test."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, **kw)[0]


# ---------------------------------------------------------------------------
# stable elementary pieces

def sin_defect(u):
    """u - sin(u), evaluated without cancellation near 0."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    return np.where(np.abs(u) < 0.1, series, u - np.sin(u))


def cos_defect2(u):
    """cos(u) - 1 + u^2/2, evaluated without cancellation near 0."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = u2 * u2 / 24.0 * (1.0 - u2 / 30.0 * (1.0 - u2 / 56.0 * (1.0 - u2 / 90.0)))
    return np.where(np.abs(u) < 0.1, series, np.cos(u) - 1.0 + 0.5 * u2)


def _unit_vector(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (d,):
        raise ModelError(f"direction must have {d} components, got shape {v.shape}")
    n = np.linalg.norm(v)
    if abs(n - 1.0) > _UNIT_TOL:
        raise ModelError(f"direction must be a unit vector (|v| = {n:.6g})")
    return v / n


def _points(t, d: int) -> np.ndarray:
    """Coerce to an (..., d) array of evaluation points."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        if d != 1:
            raise ModelError(f"scalar point given for a {d}-dimensional model")
        return t.reshape(1)
    if t.shape[-1] != d:
        raise ModelError(f"points must have {d} coordinates in the last axis")
    return t


def _abs_moment_scale(delta: float) -> float:
    """The constant c(delta) with
    int_0^inf (cos u - 1 + u^2/2) u^(-3-delta) du = c(delta),
    so that int theta_v(tau) tau^(-3-delta) dtau = c(delta) * E|<lam,v>|^(2+delta).
    """
    # Gamma(-(2+delta)) * cos(pi (2+delta) / 2); poles at integer 2+delta
    if abs(delta - round(delta)) > 1e-9:
        return special.gamma(-(2.0 + delta)) * math.cos(math.pi * (2.0 + delta) / 2.0)
    f = lambda u: float(cos_defect2(u)) * u ** (-3.0 - delta)
    lo = quad(f, 0.0, 1.0, limit=200)
    hi = quad(f, 1.0, np.inf, limit=400)
    return lo + hi


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 2.0:
        raise ModelError(f"delta must lie in (0, 2), got {delta}")
    return delta


def _combine_deficits(first, rest):
    """1 - (1 - first) * prod(1 - r for r in rest), accumulated stably."""
    acc = first
    for r in rest:
        acc = acc + r - acc * r
    return acc


def _fractional_power_mean(components, p: float) -> float:
    """E[(sum_i Y_i^2)^p] for independent Y_i and 1 < p < 2.

    ``components`` holds one (m2, d, D) triple per summand, where
    m2 = E[Y^2], D(s) = 1 - E[e^(-s Y^2)] and d(s) = 1 - E[Y^2 e^(-s Y^2)]/m2,
    both evaluated without cancellation.  With q = p - 1 in (0, 1) and the
    identity x^q = (q/Gamma(1-q)) int (1 - e^(-sx)) s^(-1-q) ds,

        E[X^p] = (q/Gamma(1-q)) int_0^inf E[X (1 - e^(-sX))] s^(-1-q) ds,

    and E[X (1 - e^(-sX))] = sum_i m2_i (1 - (1 - d_i) prod_{j!=i} (1 - D_j))
    is assembled to full relative precision.
    """
    if not 1.0 < p < 2.0:
        raise ModelError(f"fractional power mean needs p in (1,2), got {p}")
    q = p - 1.0
    mean = sum(c[0] for c in components)

    def g(s):
        ds = [c[2](s) for c in components]
        total = 0.0
        for i, (m2, dfn, _) in enumerate(components):
            total += m2 * _combine_deficits(dfn(s), (x for j, x in enumerate(ds) if j != i))
        return total

    split = 1.0 / max(mean, 1e-300)
    width = min(30.0 / (1.0 - q), 2000.0)
    head = quad(lambda u: g(math.exp(u)) * math.exp(u) ** (-q),
                math.log(split) - width, math.log(split), limit=400)
    tail = quad(lambda s: g(s) * s ** (-1.0 - q), split, np.inf, limit=400)
    return q / special.gamma(1.0 - q) * (head + tail)


# ---------------------------------------------------------------------------
# second spectral moment matrix


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """Second spectral moment matrix with extended-real entries.

    ``entries`` is the d x d symmetric matrix; divergent entries hold
    ``inf``.  ``finite_subspace`` has orthonormal columns spanning exactly
    the directions v with a finite quadratic form v' M v.
    """

    entries: np.ndarray
    finite_subspace: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ModelError("moment matrix must be square")
        fin = np.isfinite(m)
        if not np.array_equal(fin, fin.T):
            raise ModelError("divergence pattern must be symmetric")
        if not np.allclose(np.where(fin, m, 0.0), np.where(fin, m, 0.0).T, atol=1e-12):
            raise ModelError("moment matrix must be symmetric")
        if np.all(fin):
            w = np.linalg.eigvalsh(m)
            if w.min() < -1e-10 * max(1.0, abs(w.max())):
                raise ModelError("finite moment matrix must be positive semidefinite")
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "finite_subspace", np.asarray(self.finite_subspace, dtype=float))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.entries)))

    def quadratic_form(self, v) -> float:
        """v' M v in [0, inf].  Coordinates with v_i = 0 never touch divergent
        entries (the 0 * inf = 0 convention of the underlying integral)."""
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape != (self.d,):
            raise ModelError("vector dimension mismatch")
        diag_inf = ~np.isfinite(np.diag(self.entries))
        if np.any(diag_inf & (v != 0.0)):
            return INF
        keep = ~diag_inf
        sub = self.entries[np.ix_(keep, keep)]
        vv = v[keep]
        return float(vv @ sub @ vv)

    @classmethod
    def from_matrix(cls, m) -> "MomentMatrix":
        m = np.asarray(m, dtype=float)
        if np.all(np.isfinite(m)):
            return cls(m, np.eye(m.shape[0]))
        finite_axes = [i for i in range(m.shape[0]) if np.isfinite(m[i, i])]
        basis = np.zeros((m.shape[0], len(finite_axes)))
        for k, i in enumerate(finite_axes):
            basis[i, k] = 1.0
        return cls(m, basis)

    @classmethod
    def isotropic(cls, lam2: float, d: int) -> "MomentMatrix":
        if math.isinf(lam2):
            return cls.all_infinite(d)
        return cls(lam2 * np.eye(d), np.eye(d))

    @classmethod
    def all_infinite(cls, d: int) -> "MomentMatrix":
        return cls(np.full((d, d), INF), np.zeros((d, 0)))


# ---------------------------------------------------------------------------
# model catalog


class SpectralModel:
    """Common surface of the catalog families.

    Subclasses provide the analytic pieces; everything downstream (field
    simulation, crossing-rate formulas, line-sampling estimators) consumes
    only this interface.  All instances are immutable and unit variance:
    cov at the origin is exactly 1.
    """

    d: int

    # -- covariance ---------------------------------------------------------
    def cov(self, t):
        """r(t) for one point or an (..., d) array of points."""
        raise NotImplementedError

    def line_cov(self, v, tau):
        """r(tau * v) for unit v; tau may be an array."""
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        pts = np.multiply.outer(tau, v)
        return self.cov(pts)

    def line_dcov(self, v, tau):
        """d/dtau r(tau v)."""
        raise NotImplementedError

    def line_ddcov(self, v, tau):
        """d^2/dtau^2 r(tau v)."""
        raise NotImplementedError

    def line_cov_deficit(self, v, tau):
        """1 - r(tau v) without cancellation for small tau."""
        return 1.0 - self.line_cov(v, tau)

    def line_theta_prime(self, v, tau):
        """theta_v'(tau) = r_v'(tau) + lambda2_v * tau, stably where possible.

        Only meaningful when lambda2_v is finite.
        """
        lam2 = self.directional_lambda2(v)
        if math.isinf(lam2):
            raise ModelError("theta' undefined: infinite directional second moment")
        tau = np.asarray(tau, dtype=float)
        return self.line_dcov(v, tau) + lam2 * tau

    # -- spectral moments ----------------------------------------------------
    def lambda2_matrix(self) -> MomentMatrix:
        raise NotImplementedError

    def directional_lambda2(self, v) -> float:
        return self.lambda2_matrix().quadratic_form(_unit_vector(v, self.d))

    def moment_2_plus_delta(self, delta: float) -> float:
        """E ||lambda||^(2+delta) under the spectral measure, or inf."""
        raise NotImplementedError

    def directional_moment_2_plus_delta(self, v, delta: float) -> float:
        """E |<lambda, v>|^(2+delta), or inf.

        Default route: integrate theta_v(tau) tau^(-3-delta) and divide by
        the universal constant c(delta).  Families with closed forms
        override this.
        """
        delta = _check_delta(delta)
        v = _unit_vector(v, self.d)
        if not self._directional_moment_finite(v, delta):
            return INF
        lam2 = self.directional_lambda2(v)
        scale = math.sqrt(lam2) if lam2 > 0 else 1.0

        def theta_v(tau):
            return lam2 * tau * tau / 2.0 - float(self.line_cov_deficit(v, tau))

        def f(s):
            tau = math.exp(s)
            return theta_v(tau) * tau ** (-2.0 - delta)

        # below tau0 cancellation in theta dominates; fit theta ~ c tau^m
        # just above tau0 and integrate the fitted power analytically
        tau0 = 1e-3 / scale
        taus = tau0 * np.geomspace(1.0, 16.0, 9)
        vals = np.array([theta_v(t) for t in taus])
        head = 0.0
        if np.all(vals > 0):
            m = np.polyfit(np.log(taus), np.log(vals), 1)[0]
            if m - 2.0 - delta > 0.0:  # integrable head, as guaranteed by the pre-check
                head = vals[0] * tau0 ** (-3.0 - delta) * tau0 / (m - 2.0 - delta)
        s0 = math.log(tau0)
        hi_w = 40.0 / delta + 20.0
        body = quad(f, s0, s0 + hi_w, limit=400)
        return (head + body) / _abs_moment_scale(delta)

    def _directional_moment_finite(self, v, delta: float) -> bool:
        return math.isfinite(self.moment_2_plus_delta(delta))

    # -- sampling ------------------------------------------------------------
    def spectral_sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` frequencies from F, shape (size, d)."""
        raise NotImplementedError

    def spectral_radius_q95(self) -> float:
        """95th percentile of ||lambda|| (upper bound acceptable); sets the
        default sampling step of one twentieth of the dominant wavelength."""
        raise NotImplementedError

    def default_step(self) -> float:
        return (2.0 * math.pi / self.spectral_radius_q95()) / 20.0

    # -- serialization ---------------------------------------------------------
    def to_config(self) -> dict:
        raise NotImplementedError


def _radial_tail_moment_quad(pdf_radius, s: float, split: float) -> float:
    """int_0^inf rho^s pdf(rho) drho by two-piece adaptive quadrature."""
    f = lambda x: x ** s * pdf_radius(x)
    lo = quad(f, 0.0, split, limit=300, epsrel=1e-10)
    hi = quad(f, split, np.inf, limit=300, epsrel=1e-10)
    return lo + hi


@dataclass(frozen=True, eq=False)
class IsotropicGaussian(SpectralModel):
    """Squared-exponential covariance exp(-scale^2 |t|^2 / 2); the spectral
    measure is N(0, scale^2 I)."""

    scale: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.scale <= 0:
            raise ModelError("scale must be positive")
        if self.d < 1:
            raise ModelError("dimension must be >= 1")

    def cov(self, t):
        t = _points(t, self.d)
        q = np.sum(t * t, axis=-1)
        return np.exp(-0.5 * self.scale ** 2 * q)

    def line_cov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return np.exp(-0.5 * (self.scale * tau) ** 2)

    def line_dcov(self, v, tau):
        _unit_vector(v, self.d)
        q = self.scale ** 2
        tau = np.asarray(tau, dtype=float)
        return -q * tau * np.exp(-0.5 * q * tau * tau)

    def line_ddcov(self, v, tau):
        _unit_vector(v, self.d)
        q = self.scale ** 2
        tau = np.asarray(tau, dtype=float)
        return q * (q * tau * tau - 1.0) * np.exp(-0.5 * q * tau * tau)

    def line_cov_deficit(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return -np.expm1(-0.5 * (self.scale * tau) ** 2)

    def line_theta_prime(self, v, tau):
        _unit_vector(v, self.d)
        q = self.scale ** 2
        tau = np.asarray(tau, dtype=float)
        return q * tau * (-np.expm1(-0.5 * q * tau * tau))

    def lambda2_matrix(self):
        return MomentMatrix.isotropic(self.scale ** 2, self.d)

    def moment_2_plus_delta(self, delta):
        s = 2.0 + _check_delta(delta)
        return self.scale ** s * 2.0 ** (s / 2.0) * special.gamma((self.d + s) / 2.0) / special.gamma(self.d / 2.0)

    def directional_moment_2_plus_delta(self, v, delta):
        _unit_vector(v, self.d)
        s = 2.0 + _check_delta(delta)
        # <lambda, v> ~ N(0, scale^2) for any unit v
        return self.scale ** s * 2.0 ** (s / 2.0) * special.gamma((s + 1.0) / 2.0) / math.sqrt(math.pi)

    def spectral_sample(self, rng, size):
        return self.scale * rng.standard_normal((size, self.d))

    def spectral_radius_q95(self):
        return self.scale * math.sqrt(stats.chi2.ppf(0.95, self.d))

    def to_config(self):
        return {"family": "isotropic_gaussian", "dimension": str(self.d), "scale": repr(float(self.scale))}


@dataclass(frozen=True, eq=False)
class AnisotropicGaussian(SpectralModel):
    """Covariance exp(-t' A t / 2) for a symmetric positive-definite A; the
    spectral measure is N(0, A), so the second moment matrix equals A."""

    shape: np.ndarray = None
    d: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.shape, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ModelError("shape matrix must be square")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ModelError("shape matrix must be symmetric")
        w = np.linalg.eigvalsh(a)
        if w.min() <= 0:
            raise ModelError("shape matrix must be positive definite")
        object.__setattr__(self, "shape", a)
        object.__setattr__(self, "d", a.shape[0])
        object.__setattr__(self, "_chol", np.linalg.cholesky(a))
        object.__setattr__(self, "_eigs", w)

    def cov(self, t):
        t = _points(t, self.d)
        q = np.einsum("...i,ij,...j->...", t, self.shape, t)
        return np.exp(-0.5 * q)

    def _q(self, v):
        v = _unit_vector(v, self.d)
        return float(v @ self.shape @ v)

    def line_cov(self, v, tau):
        q = self._q(v)
        tau = np.asarray(tau, dtype=float)
        return np.exp(-0.5 * q * tau * tau)

    def line_dcov(self, v, tau):
        q = self._q(v)
        tau = np.asarray(tau, dtype=float)
        return -q * tau * np.exp(-0.5 * q * tau * tau)

    def line_ddcov(self, v, tau):
        q = self._q(v)
        tau = np.asarray(tau, dtype=float)
        return q * (q * tau * tau - 1.0) * np.exp(-0.5 * q * tau * tau)

    def line_cov_deficit(self, v, tau):
        q = self._q(v)
        tau = np.asarray(tau, dtype=float)
        return -np.expm1(-0.5 * q * tau * tau)

    def line_theta_prime(self, v, tau):
        q = self._q(v)
        tau = np.asarray(tau, dtype=float)
        return q * tau * (-np.expm1(-0.5 * q * tau * tau))

    def lambda2_matrix(self):
        return MomentMatrix.from_matrix(self.shape)

    def moment_2_plus_delta(self, delta):
        p = (2.0 + _check_delta(delta)) / 2.0
        components = [_gauss_sq_component(float(a)) for a in self._eigs]
        return _fractional_power_mean(components, p)

    def directional_moment_2_plus_delta(self, v, delta):
        q = self._q(v)
        s = 2.0 + _check_delta(delta)
        return q ** (s / 2.0) * 2.0 ** (s / 2.0) * special.gamma((s + 1.0) / 2.0) / math.sqrt(math.pi)

    def spectral_sample(self, rng, size):
        return rng.standard_normal((size, self.d)) @ self._chol.T

    def spectral_radius_q95(self):
        return math.sqrt(self._eigs.max() * stats.chi2.ppf(0.95, self.d))

    def to_config(self):
        rows = "; ".join(" ".join(repr(float(x)) for x in row) for row in self.shape)
        return {"family": "anisotropic_gaussian", "dimension": str(self.d), "shape": rows}


@dataclass(frozen=True, eq=False)
class Matern(SpectralModel):
    """Matern covariance with smoothness nu > 1/2 and inverse length ``scale``.

    r(t) = 2^(1-nu)/Gamma(nu) (x)^nu K_nu(x) with x = sqrt(2 nu) scale |t|.
    The spectral measure is scale times a standard multivariate t with 2 nu
    degrees of freedom, which pins every moment's finiteness analytically.
    """

    nu: float = 1.5
    scale: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.nu <= 0.5:
            raise ModelError("Matern smoothness must exceed 1/2")
        if self.scale <= 0:
            raise ModelError("scale must be positive")
        object.__setattr__(self, "_kappa", math.sqrt(2.0 * self.nu) * self.scale)
        object.__setattr__(self, "_c", 2.0 ** (1.0 - self.nu) / special.gamma(self.nu))

    def _profile(self, x):
        # unit-variance radial profile in x = kappa * |t|
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        pos = x > 0
        xp = x[pos]
        out[pos] = self._c * xp ** self.nu * special.kv(self.nu, xp)
        return out

    def cov(self, t):
        t = _points(t, self.d)
        r = np.sqrt(np.sum(t * t, axis=-1))
        return self._profile(self._kappa * r)

    def line_cov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return self._profile(self._kappa * np.abs(tau))

    def line_dcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        x = self._kappa * np.abs(tau)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        out[pos] = -self._c * self._kappa * xp ** self.nu * special.kv(self.nu - 1.0, xp)
        return out * np.sign(tau)

    def line_ddcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        x = self._kappa * np.abs(tau)
        lam2 = self.directional_lambda2_value()
        out = np.full_like(x, -lam2 if math.isfinite(lam2) else -INF)
        pos = x > 0
        xp = x[pos]
        out[pos] = -self._c * self._kappa ** 2 * (
            (2.0 * self.nu - 1.0) * xp ** (self.nu - 1.0) * special.kv(self.nu - 1.0, xp)
            - xp ** self.nu * special.kv(self.nu, xp)
        )
        return out

    def directional_lambda2_value(self) -> float:
        if self.nu <= 1.0:
            return INF
        return self.scale ** 2 * self.nu / (self.nu - 1.0)

    def line_theta_prime(self, v, tau):
        lam2 = self.directional_lambda2_value()
        if math.isinf(lam2):
            raise ModelError("theta' undefined: infinite second moment (nu <= 1)")
        tau = np.asarray(tau, dtype=float)
        scalar = tau.ndim == 0
        t = np.atleast_1d(tau).astype(float)
        out = np.asarray(self.line_dcov(v, t) + lam2 * t, dtype=float)
        # tiny lags lose the leading digits to cancellation; integrate the
        # folded spectral density against the sine defect instead
        for i in np.flatnonzero(np.abs(self._kappa * t) < 1e-3):
            ti = float(t[i])
            out[i] = 0.0 if ti == 0.0 else math.copysign(self._theta_prime_quad(abs(ti)), ti)
        return float(out[0]) if scalar else out

    def _theta_prime_quad(self, tau: float) -> float:
        if tau == 0.0:
            return 0.0
        eta = 2.0 * self.nu

        def f(lam):
            return lam * float(sin_defect(lam * tau)) * 2.0 * stats.t.pdf(lam / self.scale, eta) / self.scale

        split = 1.0 / tau
        lo = quad(f, 0.0, split, limit=300)
        hi = quad(f, split, np.inf, limit=300)
        return lo + hi

    def lambda2_matrix(self):
        return MomentMatrix.isotropic(self.directional_lambda2_value(), self.d)

    def moment_2_plus_delta(self, delta):
        s = 2.0 + _check_delta(delta)
        eta = 2.0 * self.nu
        if s >= eta:
            return INF
        # radial quadrature over ||lambda|| = scale * ||t_eta vector||
        dd = self.d

        def pdf_radius(w):
            # w = scale * sqrt(d * x), x ~ F(d, eta)
            x = w * w / (self.scale ** 2 * dd)
            return stats.f.pdf(x, dd, eta) * 2.0 * w / (self.scale ** 2 * dd)

        split = self.scale * math.sqrt(dd * stats.f.ppf(0.5, dd, eta))
        return _radial_tail_moment_quad(pdf_radius, s, split)

    def directional_moment_2_plus_delta(self, v, delta):
        _unit_vector(v, self.d)
        s = 2.0 + _check_delta(delta)
        eta = 2.0 * self.nu
        if s >= eta:
            return INF
        return (self.scale ** s * eta ** (s / 2.0) * special.gamma((s + 1.0) / 2.0)
                * special.gamma((eta - s) / 2.0) / (math.sqrt(math.pi) * special.gamma(eta / 2.0)))

    def spectral_sample(self, rng, size):
        z = rng.standard_normal((size, self.d))
        w = rng.chisquare(2.0 * self.nu, size)
        return self.scale * z / np.sqrt(w / (2.0 * self.nu))[:, None]

    def spectral_radius_q95(self):
        return self.scale * math.sqrt(self.d * stats.f.ppf(0.95, self.d, 2.0 * self.nu))

    def to_config(self):
        return {"family": "matern", "dimension": str(self.d), "nu": repr(float(self.nu)), "scale": repr(float(self.scale))}


@dataclass(frozen=True, eq=False)
class OrnsteinUhlenbeck(SpectralModel):
    """Exponential covariance exp(-rate |t|); the spectral measure is a
    multivariate Cauchy, so every second moment diverges."""

    rate: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.rate <= 0:
            raise ModelError("rate must be positive")

    def cov(self, t):
        t = _points(t, self.d)
        r = np.sqrt(np.sum(t * t, axis=-1))
        return np.exp(-self.rate * r)

    def line_cov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return np.exp(-self.rate * np.abs(tau))

    def line_dcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return -self.rate * np.sign(tau) * np.exp(-self.rate * np.abs(tau))

    def line_ddcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return self.rate ** 2 * np.exp(-self.rate * np.abs(tau))

    def line_cov_deficit(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return -np.expm1(-self.rate * np.abs(tau))

    def lambda2_matrix(self):
        return MomentMatrix.all_infinite(self.d)

    def moment_2_plus_delta(self, delta):
        _check_delta(delta)
        return INF

    def directional_moment_2_plus_delta(self, v, delta):
        _unit_vector(v, self.d)
        _check_delta(delta)
        return INF

    def spectral_sample(self, rng, size):
        z = rng.standard_normal((size, self.d))
        w = rng.chisquare(1.0, size)
        return self.rate * z / np.sqrt(w)[:, None]

    def spectral_radius_q95(self):
        return self.rate * math.sqrt(self.d * stats.f.ppf(0.95, self.d, 1.0))

    def to_config(self):
        return {"family": "ornstein_uhlenbeck", "dimension": str(self.d), "rate": repr(float(self.rate))}


@dataclass(frozen=True, eq=False)
class CosineAtoms(SpectralModel):
    """Discrete symmetric spectral measure: r(t) = sum_k w_k cos(<lam_k, t>).

    Frequencies must come in +/- pairs with equal weights; sample paths are
    trigonometric polynomials, hence analytic.
    """

    frequencies: np.ndarray = None
    weights: np.ndarray = None
    d: int = field(init=False)

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if f.shape[0] != w.shape[0]:
            raise ModelError("one weight per frequency required")
        if np.any(w < 0):
            raise ModelError("weights must be nonnegative")
        tot = w.sum()
        if tot <= 0:
            raise ModelError("weights must have positive mass")
        if abs(tot - 1.0) > 1e-9:
            raise ModelError("weights must sum to 1")
        w = w / tot
        # symmetry: every atom needs its mirror with the same weight
        for k in range(f.shape[0]):
            match = np.all(np.abs(f + f[k]) < 1e-12, axis=1)
            if not np.any(match) or abs(w[match].sum() - w[k]) > 1e-9:
                raise ModelError("frequencies must be listed as symmetric +/- pairs with equal weights")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "d", f.shape[1])

    def cov(self, t):
        t = _points(t, self.d)
        phase = t @ self.frequencies.T  # (..., K)
        return np.cos(phase) @ self.weights

    def _mu(self, v):
        v = _unit_vector(v, self.d)
        return self.frequencies @ v

    def line_cov(self, v, tau):
        mu = self._mu(v)
        tau = np.asarray(tau, dtype=float)
        return np.cos(np.multiply.outer(tau, mu)) @ self.weights

    def line_dcov(self, v, tau):
        mu = self._mu(v)
        tau = np.asarray(tau, dtype=float)
        return -np.sin(np.multiply.outer(tau, mu)) @ (self.weights * mu)

    def line_ddcov(self, v, tau):
        mu = self._mu(v)
        tau = np.asarray(tau, dtype=float)
        return -np.cos(np.multiply.outer(tau, mu)) @ (self.weights * mu * mu)

    def line_cov_deficit(self, v, tau):
        mu = self._mu(v)
        tau = np.asarray(tau, dtype=float)
        return (2.0 * np.sin(np.multiply.outer(tau, mu) / 2.0) ** 2) @ self.weights

    def line_theta_prime(self, v, tau):
        mu = self._mu(v)
        tau = np.asarray(tau, dtype=float)
        return sin_defect(np.multiply.outer(tau, mu)) @ (self.weights * mu)

    def lambda2_matrix(self):
        m = np.einsum("k,ki,kj->ij", self.weights, self.frequencies, self.frequencies)
        return MomentMatrix.from_matrix(m)

    def moment_2_plus_delta(self, delta):
        s = 2.0 + _check_delta(delta)
        return float(self.weights @ np.linalg.norm(self.frequencies, axis=1) ** s)

    def directional_moment_2_plus_delta(self, v, delta):
        s = 2.0 + _check_delta(delta)
        return float(self.weights @ np.abs(self._mu(v)) ** s)

    def spectral_sample(self, rng, size):
        idx = rng.choice(self.frequencies.shape[0], size=size, p=self.weights)
        return self.frequencies[idx]

    def spectral_radius_q95(self):
        return float(np.linalg.norm(self.frequencies, axis=1).max())

    def to_config(self):
        freqs = "; ".join(" ".join(repr(float(x)) for x in row) for row in self.frequencies)
        ws = " ".join(repr(float(x)) for x in self.weights)
        return {"family": "cosine_atoms", "dimension": str(self.d), "frequencies": freqs, "weights": ws}


@dataclass(frozen=True, eq=False)
class RandomPlaneWave(SpectralModel):
    """Monochromatic field: spectral measure uniform on the radius-k sphere.

    r(t) = 2^(d/2-1) Gamma(d/2) J_{d/2-1}(k|t|) / (k|t|)^(d/2-1); sample
    paths are analytic.
    """

    wavenumber: float = 1.0
    d: int = 2

    def __post_init__(self):
        if self.wavenumber <= 0:
            raise ModelError("wavenumber must be positive")
        if self.d < 1:
            raise ModelError("dimension must be >= 1")
        nu = self.d / 2.0 - 1.0
        object.__setattr__(self, "_nu", nu)
        object.__setattr__(self, "_cnu", 2.0 ** nu * special.gamma(nu + 1.0))

    def _phi(self, x):
        x = np.asarray(x, dtype=float)
        nu = self._nu
        out = np.ones_like(x)
        pos = x > 1e-8
        xp = x[pos]
        if nu == 0.0:
            out[pos] = special.j0(xp)
        else:
            out[pos] = self._cnu * special.jv(nu, xp) / xp ** nu
        small = ~pos & (x > 0)
        xs = x[small]
        out[small] = 1.0 - xs * xs / (2.0 * self.d)
        return out

    def _phi_prime(self, x):
        x = np.asarray(x, dtype=float)
        nu = self._nu
        out = np.zeros_like(x)
        pos = x > 1e-8
        xp = x[pos]
        out[pos] = -self._cnu * special.jv(nu + 1.0, xp) / xp ** nu
        small = ~pos & (x > 0)
        out[small] = -x[small] / self.d
        return out

    def cov(self, t):
        t = _points(t, self.d)
        r = np.sqrt(np.sum(t * t, axis=-1))
        return self._phi(self.wavenumber * r)

    def line_cov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return self._phi(self.wavenumber * np.abs(tau))

    def line_dcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        return self.wavenumber * self._phi_prime(self.wavenumber * np.abs(tau)) * np.sign(tau)

    def line_ddcov(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        x = self.wavenumber * np.abs(tau)
        nu = self._nu
        out = np.full_like(x, -self.wavenumber ** 2 / self.d)
        pos = x > 1e-8
        xp = x[pos]
        out[pos] = -self.wavenumber ** 2 * self._cnu * (
            special.jv(nu + 1.0, xp) / xp ** (nu + 1.0) - special.jv(nu + 2.0, xp) / xp ** nu
        )
        return out

    def line_cov_deficit(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        x = self.wavenumber * np.abs(tau)
        out = 1.0 - self._phi(x)
        small = x < 1e-4
        out = np.where(small, x * x / (2.0 * self.d), out)
        return out

    def line_theta_prime(self, v, tau):
        _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        k = self.wavenumber
        x = k * np.abs(tau)
        direct = k * (x / self.d + self._phi_prime(x))
        # series from the m >= 2 coefficients of phi for small arguments
        nu = self._nu
        acc = np.zeros_like(x)
        a_m = 1.0
        for m in range(1, 9):
            a_m = a_m * (-1.0) / (4.0 * m * (nu + m))
            if m >= 2:
                acc = acc + 2.0 * m * a_m * x ** (2 * m - 1)
        series = k * acc
        return np.where(x < 0.5, series, direct) * np.sign(tau)

    def lambda2_matrix(self):
        return MomentMatrix.isotropic(self.wavenumber ** 2 / self.d, self.d)

    def moment_2_plus_delta(self, delta):
        return self.wavenumber ** (2.0 + _check_delta(delta))

    def directional_moment_2_plus_delta(self, v, delta):
        _unit_vector(v, self.d)
        s = 2.0 + _check_delta(delta)
        if self.d == 1:
            return self.wavenumber ** s
        # E|u_1|^s over the unit sphere
        moment = special.gamma(self.d / 2.0) * special.gamma((s + 1.0) / 2.0) / (
            special.gamma((self.d + s) / 2.0) * special.gamma(0.5))
        return self.wavenumber ** s * moment

    def spectral_sample(self, rng, size):
        z = rng.standard_normal((size, self.d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return self.wavenumber * z

    def spectral_radius_q95(self):
        return self.wavenumber

    def to_config(self):
        return {"family": "random_plane_wave", "dimension": str(self.d), "wavenumber": repr(float(self.wavenumber))}


@dataclass(frozen=True, eq=False)
class ProductSplit(SpectralModel):
    """Independent product across coordinate axes: r(t) = prod_i r_i(t_i).

    Each marginal is a one-dimensional catalog model; the spectral measure
    is the product of the marginal measures, so the second moment matrix is
    diagonal and mixed-moment finiteness splits by axis.
    """

    marginals: tuple = None
    d: int = field(init=False)

    def __post_init__(self):
        ms = tuple(self.marginals)
        if not ms:
            raise ModelError("at least one marginal required")
        for m in ms:
            if m.d != 1:
                raise ModelError("marginals must be one-dimensional models")
        object.__setattr__(self, "marginals", ms)
        object.__setattr__(self, "d", len(ms))

    def _e1(self):
        return np.array([1.0])

    def cov(self, t):
        t = _points(t, self.d)
        out = np.ones(t.shape[:-1])
        for i, m in enumerate(self.marginals):
            out = out * m.line_cov(self._e1(), t[..., i])
        return out

    def line_cov(self, v, tau):
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        out = np.ones_like(tau, dtype=float)
        for i, m in enumerate(self.marginals):
            out = out * m.line_cov(self._e1(), v[i] * tau)
        return out

    def line_dcov(self, v, tau):
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        covs = [m.line_cov(self._e1(), v[i] * tau) for i, m in enumerate(self.marginals)]
        total = np.zeros_like(tau, dtype=float)
        for i, m in enumerate(self.marginals):
            term = v[i] * m.line_dcov(self._e1(), v[i] * tau)
            for j, c in enumerate(covs):
                if j != i:
                    term = term * c
            total = total + term
        return total

    def line_ddcov(self, v, tau):
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        covs = [m.line_cov(self._e1(), v[i] * tau) for i, m in enumerate(self.marginals)]
        dcovs = [v[i] * m.line_dcov(self._e1(), v[i] * tau) for i, m in enumerate(self.marginals)]
        total = np.zeros_like(tau, dtype=float)
        n = len(self.marginals)
        for i in range(n):
            term = v[i] ** 2 * self.marginals[i].line_ddcov(self._e1(), v[i] * tau)
            for j in range(n):
                if j != i:
                    term = term * covs[j]
            total = total + term
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                term = dcovs[i] * dcovs[j]
                for k in range(n):
                    if k != i and k != j:
                        term = term * covs[k]
                total = total + term
        return total

    def line_cov_deficit(self, v, tau):
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        # 1 - prod(1 - D_i) accumulated without cancellation
        out = np.zeros_like(tau, dtype=float)
        for i, m in enumerate(self.marginals):
            di = m.line_cov_deficit(self._e1(), v[i] * tau)
            out = out + di - out * di
        return out

    def line_theta_prime(self, v, tau):
        v = _unit_vector(v, self.d)
        tau = np.asarray(tau, dtype=float)
        lam2s = [m.directional_lambda2(self._e1()) for m in self.marginals]
        if any(math.isinf(l) and v[i] != 0 for i, l in enumerate(lam2s)):
            raise ModelError("theta' undefined: infinite directional second moment")
        covs = [m.line_cov(self._e1(), v[i] * tau) for i, m in enumerate(self.marginals)]
        deficits = [m.line_cov_deficit(self._e1(), v[i] * tau) for i, m in enumerate(self.marginals)]
        n = len(self.marginals)
        total = np.zeros_like(tau, dtype=float)
        for i in range(n):
            if v[i] == 0.0:
                continue
            # 1 - prod_{j != i} r_j, accumulated from the deficits
            rest = np.zeros_like(tau, dtype=float)
            for j in range(n):
                if j != i:
                    rest = rest + deficits[j] - rest * deficits[j]
            total = total + v[i] ** 2 * lam2s[i] * tau * rest
            # v_i * theta_i'(v_i tau) is even in the sign of v_i
            term = abs(v[i]) * self.marginals[i].line_theta_prime(self._e1(), abs(v[i]) * tau)
            for j in range(n):
                if j != i:
                    term = term * covs[j]
            total = total + term
        return total

    def lambda2_matrix(self):
        diag = [m.directional_lambda2(self._e1()) for m in self.marginals]
        entries = np.diag(np.asarray(diag, dtype=float))
        finite_axes = [i for i, x in enumerate(diag) if math.isfinite(x)]
        basis = np.zeros((self.d, len(finite_axes)))
        for k, i in enumerate(finite_axes):
            basis[i, k] = 1.0
        return MomentMatrix(entries, basis)

    def moment_2_plus_delta(self, delta):
        delta = _check_delta(delta)
        marg = [m.directional_moment_2_plus_delta(np.array([1.0]), delta) for m in self.marginals]
        if any(math.isinf(x) for x in marg):
            return INF
        p = (2.0 + delta) / 2.0
        components = [m._sq_component() for m in self.marginals]
        return _fractional_power_mean(components, p)

    def _directional_moment_finite(self, v, delta):
        for i, m in enumerate(self.marginals):
            if v[i] != 0.0 and math.isinf(m.directional_moment_2_plus_delta(np.array([1.0]), delta)):
                return False
        return True

    def spectral_sample(self, rng, size):
        cols = [m.spectral_sample(rng, size)[:, 0] for m in self.marginals]
        return np.column_stack(cols)

    def spectral_radius_q95(self):
        return math.sqrt(sum(m.spectral_radius_q95() ** 2 for m in self.marginals))

    def to_config(self):
        cfg = {"family": "product_split", "dimension": str(self.d)}
        for i, m in enumerate(self.marginals, start=1):
            sub = m.to_config()
            cfg[f"axis{i}_family"] = sub.pop("family")
            sub.pop("dimension")
            for k, val in sub.items():
                cfg[f"axis{i}_{k}"] = val
        return cfg


# Stable squared-frequency Laplace deficits D(s) = 1 - E e^(-s Y^2) and
# d(s) = 1 - E[Y^2 e^(-s Y^2)]/E[Y^2], one triple (E[Y^2], d, D) per marginal.
# Consumed by the fractional-moment route for anisotropic and product models.

def _gauss_sq_component(variance):
    m2 = variance
    D = lambda s: -math.expm1(-0.5 * math.log1p(2.0 * variance * s))
    d = lambda s: -math.expm1(-1.5 * math.log1p(2.0 * variance * s))
    return (m2, d, D)


def _atoms_sq_component(lams, weights):
    lam2 = np.asarray(lams, dtype=float) ** 2
    w = np.asarray(weights, dtype=float)
    m2 = float(w @ lam2)
    D = lambda s: float(w @ (-np.expm1(-s * lam2)))
    d = lambda s: float(w @ (lam2 * (-np.expm1(-s * lam2)))) / m2
    return (m2, d, D)


def _matern_sq_component(model):
    eta = 2.0 * model.nu
    m2 = model.directional_lambda2_value()

    def D(s):
        f = lambda t: -math.expm1(-s * (model.scale * t) ** 2) * 2.0 * stats.t.pdf(t, eta)
        return quad(f, 0.0, np.inf, limit=200)

    def d(s):
        f = lambda t: (model.scale * t) ** 2 * (-math.expm1(-s * (model.scale * t) ** 2)) \
            * 2.0 * stats.t.pdf(t, eta)
        return quad(f, 0.0, np.inf, limit=200) / m2

    return (m2, d, D)


def _iso_gauss_sq_component(self):
    return _gauss_sq_component(self.scale ** 2)


def _atoms_sq_component_method(self):
    return _atoms_sq_component(self.frequencies[:, 0], self.weights)


def _matern_sq_component_method(self):
    if self.nu <= 1.0:
        raise ModelError("squared-frequency component undefined for infinite second moment")
    return _matern_sq_component(self)


def _planewave_sq_component_method(self):
    return _atoms_sq_component([self.wavenumber], [1.0])


IsotropicGaussian._sq_component = _iso_gauss_sq_component
CosineAtoms._sq_component = _atoms_sq_component_method
Matern._sq_component = _matern_sq_component_method
RandomPlaneWave._sq_component = _planewave_sq_component_method


# ---------------------------------------------------------------------------
# directional view


@dataclass(eq=False)
class DirectionalSpectrum:
    """A model restricted to the line through the origin with unit direction v."""

    model: SpectralModel
    v: np.ndarray

    def __post_init__(self):
        self.v = _unit_vector(self.v, self.model.d)

    @cached_property
    def lambda2(self) -> float:
        return self.model.directional_lambda2(self.v)

    def cov(self, tau):
        return self.model.line_cov(self.v, tau)

    def dcov(self, tau):
        return self.model.line_dcov(self.v, tau)

    def ddcov(self, tau):
        return self.model.line_ddcov(self.v, tau)

    def cov_deficit(self, tau):
        return self.model.line_cov_deficit(self.v, tau)

    def theta(self, tau):
        """theta_v(tau) = r_v(tau) - 1 + lambda2_v tau^2 / 2, nonnegative."""
        lam2 = self.lambda2
        if math.isinf(lam2):
            raise ModelError("theta undefined: infinite directional second moment")
        tau = np.asarray(tau, dtype=float)
        return 0.5 * lam2 * tau * tau - self.cov_deficit(tau)

    def theta_prime(self, tau):
        if math.isinf(self.lambda2):
            raise ModelError("theta' undefined: infinite directional second moment")
        return self.model.line_theta_prime(self.v, tau)

    def moment_2_plus_delta(self, delta):
        return self.model.directional_moment_2_plus_delta(self.v, delta)


# spec-facing operations --------------------------------------------------------


def covariance(model: SpectralModel, t) -> float:
    """r(t)."""
    return float(model.cov(np.asarray(t, dtype=float)))


def directional_covariance(spec: DirectionalSpectrum, tau) -> float:
    return float(spec.cov(tau))


def lambda2_matrix(model: SpectralModel) -> MomentMatrix:
    return model.lambda2_matrix()


def directional_lambda2(model: SpectralModel, v) -> float:
    return model.directional_lambda2(v)


def moment_2_plus_delta(model: SpectralModel, delta: float) -> float:
    return model.moment_2_plus_delta(delta)


def theta(spec: DirectionalSpectrum, tau) -> float:
    return float(spec.theta(tau))


def geman_integrand(spec: DirectionalSpectrum, tau):
    """2 theta_v'(tau) / tau^2, the density whose integrability near zero
    controls the second crossing moment."""
    tau = np.asarray(tau, dtype=float)
    return 2.0 * spec.theta_prime(tau) / (tau * tau)


def geman_integral(spec: DirectionalSpectrum, a: float) -> float:
    """int_0^{2a} 2 theta_v'(tau)/tau^2 dtau, or inf when the integrand is
    not integrable at 0 (log-log slope test near the origin)."""
    if a <= 0:
        raise ModelError("a must be positive")
    lam2 = spec.lambda2
    if math.isinf(lam2):
        raise ModelError("Geman integral undefined: infinite directional second moment")
    scale = math.sqrt(lam2) if lam2 > 0 else 1.0
    tau0 = min(1e-3 / scale, a)

    # slope of the integrand on a log grid just above tau0
    taus = tau0 * np.geomspace(1.0, 64.0, 13)
    taus = taus[taus < 2.0 * a]
    vals = np.asarray(geman_integrand(spec, taus), dtype=float)
    if np.any(vals < -1e-12):
        raise NumericalError("Geman integrand went negative; covariance derivatives inconsistent")
    pos = vals > 0
    if pos.sum() >= 3:
        slope = np.polyfit(np.log(taus[pos]), np.log(vals[pos]), 1)[0]
        if slope <= -1.0:
            return INF
        head = float(vals[0]) * tau0 / (slope + 1.0)  # int_0^tau0 c t^slope dt
    else:
        head = 0.0

    body = quad(lambda t: float(geman_integrand(spec, t)), tau0, 2.0 * a,
                limit=400, epsabs=1e-12, epsrel=1e-10)
    return head + body


# ---------------------------------------------------------------------------
# configuration registry


def model_from_config(cfg: dict) -> SpectralModel:
    """Build a model from a flat string-keyed mapping (see ``to_config``)."""
    keys = dict(cfg)
    family = keys.pop("family", None)
    if family is None:
        raise ModelError("model config needs a 'family' key")
    try:
        if family == "isotropic_gaussian":
            model = IsotropicGaussian(scale=float(keys.pop("scale", 1.0)),
                                      d=int(keys.pop("dimension")))
        elif family == "anisotropic_gaussian":
            rows = [[float(x) for x in row.split()] for row in keys.pop("shape").split(";")]
            keys.pop("dimension", None)
            model = AnisotropicGaussian(shape=np.array(rows))
        elif family == "matern":
            model = Matern(nu=float(keys.pop("nu")), scale=float(keys.pop("scale", 1.0)),
                           d=int(keys.pop("dimension")))
        elif family == "ornstein_uhlenbeck":
            model = OrnsteinUhlenbeck(rate=float(keys.pop("rate", 1.0)),
                                      d=int(keys.pop("dimension")))
        elif family == "cosine_atoms":
            freqs = [[float(x) for x in row.split()] for row in keys.pop("frequencies").split(";")]
            w = [float(x) for x in keys.pop("weights").split()]
            keys.pop("dimension", None)
            model = CosineAtoms(frequencies=np.array(freqs), weights=np.array(w))
        elif family == "random_plane_wave":
            model = RandomPlaneWave(wavenumber=float(keys.pop("wavenumber")),
                                    d=int(keys.pop("dimension")))
        elif family == "product_split":
            keys.pop("dimension", None)
            margs = []
            i = 1
            while f"axis{i}_family" in keys:
                sub = {"family": keys.pop(f"axis{i}_family"), "dimension": "1"}
                prefix = f"axis{i}_"
                for k in [k for k in keys if k.startswith(prefix)]:
                    sub[k[len(prefix):]] = keys.pop(k)
                margs.append(model_from_config(sub))
                i += 1
            model = ProductSplit(marginals=tuple(margs))
        else:
            raise ModelError(f"unknown model family {family!r}")
    except KeyError as exc:
        raise ModelError(f"model config missing key {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"bad model parameter: {exc}") from exc
    if keys:
        raise ModelError(f"unknown model keys: {sorted(keys)}")
    return model


CATALOG_FAMILIES = ("isotropic_gaussian", "anisotropic_gaussian", "matern",
                    "ornstein_uhlenbeck", "cosine_atoms", "random_plane_wave",
                    "product_split")
