"""Line-sampling estimation of level-set volume.

The (d-1)-dimensional measure of a set B inside a window K is recovered by
averaging weighted intersection counts over random lines:

    value = mean over lines of  c_{d-1} |S^{d-1}| H_{d-1}(shadow_v) * count,

with v uniform on the sphere and the offset y uniform on the shadow (the
orthogonal projection of K on v-perp).  For a ball the shadow is a
(d-1)-ball; for a box its measure is sum_i |v_i| prod_{j != i} L_j and
offsets are drawn by rejection against the exact hit test, so every kept
line meets K.

Estimators come in three flavors: crossing counts of one harmonic-ensemble
realization (the level-set estimate), analytic counts for deterministic
shapes (an end-to-end check of the constants and weights), and
per-realization replication for empirical moments of the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GateViolation, ModelError, NumericalError, RefinementError
from .kacrice import Ball, Box, LevelDomain, ball_volume, crofton_constant, sphere_area
from .fieldsim import HarmonicEnsemble, count_sign_changes, refine_crossings, sample_ensemble
from .rng import fold_seed, make_rng, STREAM_BOOTSTRAP, STREAM_LINE, STREAM_SHAPE
from .spectral import SpectralModel


@dataclass(frozen=True, eq=False)
class LinePlan:
    """How many lines to throw at one realization, and how to count on them."""

    n_lines: int
    domain: LevelDomain
    seed: int = 0
    refinement: bool = True
    h: float | None = None  # grid step; None defers to the model default

    def __post_init__(self):
        if self.n_lines < 1:
            raise ModelError("a line plan needs at least one line")


@dataclass(frozen=True, eq=False)
class LineRecord:
    v: np.ndarray
    y: np.ndarray
    weight: float
    count: int
    flagged: bool


@dataclass(frozen=True, eq=False)
class CroftonEstimate:
    """Monte-Carlo line-sampling estimate with its standard error."""

    value: float
    stderr: float
    n_lines: int
    n_flagged: int
    per_line: tuple

    def __post_init__(self):
        if self.value < -1e-12:
            raise ModelError("estimate must be nonnegative")

    @property
    def values(self) -> np.ndarray:
        return np.array([r.weight * r.count for r in self.per_line if not r.flagged])


# ---------------------------------------------------------------------------
# line geometry


def _uniform_direction(d: int, rng) -> np.ndarray:
    while True:
        z = rng.standard_normal(d)
        n = np.linalg.norm(z)
        if n > 1e-12:
            return z / n


def _perp_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of v-perp as columns, deterministic in v."""
    d = v.shape[0]
    if d == 1:
        return np.zeros((1, 0))
    # Householder reflection sending e1 to v; remaining columns span v-perp
    e1 = np.zeros(d)
    e1[0] = 1.0
    w = v - e1
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        return np.eye(d)[:, 1:]
    w = w / nw
    H = np.eye(d) - 2.0 * np.outer(w, w)
    return H[:, 1:]


def shadow_measure(region, v: np.ndarray) -> float:
    """H_{d-1} of the orthogonal projection of the window on v-perp."""
    d = region.d
    if d == 1:
        return 1.0  # counting measure of the single projected point
    if isinstance(region, Ball):
        return ball_volume(d - 1, region.radius)
    if isinstance(region, Box):
        sides = region.sides
        total = 0.0
        for i in range(d):
            prod = 1.0
            for j in range(d):
                if j != i:
                    prod *= sides[j]
            total += abs(v[i]) * prod
        return float(total)
    raise ModelError("unsupported window type")


def segment_in_domain(region, v, y):
    """The parameter interval [t_min, t_max] of the line y + t v inside the
    window, or None when the intersection is empty or degenerate."""
    v = np.asarray(v, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if isinstance(region, Ball):
        w = y - region.center
        b = -float(w @ v)
        disc = b * b - float(w @ w) + region.radius ** 2
        if disc <= 0.0:
            return None
        s = math.sqrt(disc)
        return (b - s, b + s)
    if isinstance(region, Box):
        t_lo, t_hi = -math.inf, math.inf
        for i in range(region.d):
            if v[i] == 0.0:
                if not (region.lower[i] <= y[i] <= region.upper[i]):
                    return None
                continue
            a = (region.lower[i] - y[i]) / v[i]
            b = (region.upper[i] - y[i]) / v[i]
            if a > b:
                a, b = b, a
            t_lo = max(t_lo, a)
            t_hi = min(t_hi, b)
        if not (t_hi > t_lo) or math.isinf(t_lo) or math.isinf(t_hi):
            return None
        return (t_lo, t_hi)
    raise ModelError("unsupported window type")


def sample_line(domain: LevelDomain, rng):
    """Draw (v, y, weight): v uniform on the sphere, y uniform on the shadow
    of the window, weight = c_{d-1} |S^{d-1}| H_{d-1}(shadow)."""
    region = domain.region
    d = region.d
    base = crofton_constant(d) * sphere_area(d)
    if d == 1:
        v = np.array([1.0 if rng.random() < 0.5 else -1.0])
        return v, np.zeros(1), base * 1.0
    v = _uniform_direction(d, rng)
    measure = shadow_measure(region, v)
    weight = base * measure
    basis = _perp_basis(v)
    if isinstance(region, Ball):
        # uniform point of the (d-1)-ball of radius a
        z = rng.standard_normal(d - 1)
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            z = np.zeros(d - 1)
            z[0] = 1.0
            nz = 1.0
        radius = region.radius * rng.random() ** (1.0 / (d - 1))
        offset = basis @ (radius * z / nz)
        center_perp = region.center - float(region.center @ v) * v
        return v, center_perp + offset, weight
    # Box: rejection from the bounding rectangle of the shadow in the basis
    center_perp = region.center - float(region.center @ v) * v
    half = 0.5 * (np.abs(basis.T) @ region.sides)
    for _ in range(100000):
        c = rng.uniform(-half, half)
        y = center_perp + basis @ c
        if segment_in_domain(region, v, y) is not None:
            return v, y, weight
    raise NumericalError("shadow rejection sampling failed to accept a point")


# ---------------------------------------------------------------------------
# estimators


def _count_on_line(field: HarmonicEnsemble, v, y, segment, u, h, refinement):
    t_lo, t_hi = segment
    if refinement:
        return refine_crossings(field, v, y, segment, u, h)
    n = max(int(math.ceil((t_hi - t_lo) / h)) + 1, 2)
    taus = np.linspace(t_lo, t_hi, n)
    vals = field.on_line(v, y, taus)
    return count_sign_changes(vals, u)


def _estimate_from_records(records) -> CroftonEstimate:
    kept = [r for r in records if not r.flagged]
    flagged = len(records) - len(kept)
    if not kept:
        raise NumericalError("all lines flagged during refinement")
    vals = np.array([r.weight * r.count for r in kept], dtype=float)
    value = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return CroftonEstimate(value=value, stderr=stderr, n_lines=len(records),
                           n_flagged=flagged, per_line=tuple(records))


def crofton_estimate(field: HarmonicEnsemble, u: float, plan: LinePlan) -> CroftonEstimate:
    """Level-set measure of one realization by weighted line counts."""
    region = plan.domain.region
    if region.d != field.d:
        raise ModelError("window and field dimensions differ")
    h = plan.h if plan.h is not None else field.model.default_step()
    rng = make_rng(plan.seed, STREAM_LINE)
    records = []
    for _ in range(plan.n_lines):
        v, y, weight = sample_line(plan.domain, rng)
        seg = segment_in_domain(region, v, y)
        if seg is None:
            records.append(LineRecord(v=v, y=y, weight=weight, count=0, flagged=False))
            continue
        try:
            cnt = _count_on_line(field, v, y, seg, u, h, plan.refinement)
            records.append(LineRecord(v=v, y=y, weight=weight, count=cnt, flagged=False))
        except RefinementError:
            records.append(LineRecord(v=v, y=y, weight=weight, count=-1, flagged=True))
    return _estimate_from_records(records)


# deterministic shapes ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereShape:
    """The (d-1)-sphere of the given radius; every non-tangent secant line
    meets it in exactly two points."""

    center: np.ndarray
    radius: float

    def count(self, v, y) -> int:
        c = np.asarray(self.center, dtype=float)
        w = y - c
        w_perp = w - float(w @ v) * v
        return 2 if float(w_perp @ w_perp) < self.radius ** 2 else 0

    def surface_measure(self, d: int) -> float:
        return sphere_area(d) * self.radius ** (d - 1)


@dataclass(frozen=True, eq=False)
class HyperplanePatch:
    """A (d-1)-box patch inside the hyperplane <n, x> = b."""

    normal: np.ndarray
    offset: float
    halfwidths: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", n / np.linalg.norm(n))
        object.__setattr__(self, "halfwidths", np.asarray(self.halfwidths, dtype=float))
        object.__setattr__(self, "_basis", _perp_basis(self.normal))

    def count(self, v, y) -> int:
        nv = float(self.normal @ v)
        if abs(nv) < 1e-14:
            return 0
        t = (self.offset - float(self.normal @ y)) / nv
        p = y + t * v - self.offset * self.normal
        coords = self._basis.T @ p
        return 1 if np.all(np.abs(coords) <= self.halfwidths) else 0

    def surface_measure(self, d: int) -> float:
        return float(np.prod(2.0 * self.halfwidths))


@dataclass(frozen=True, eq=False)
class TwoPointSet:
    """Two points on the line (d = 1 only); the whole line hits both."""

    points: np.ndarray

    def count(self, v, y) -> int:
        return int(np.asarray(self.points).size)

    def surface_measure(self, d: int) -> float:
        return float(np.asarray(self.points).size)


def deterministic_shape_oracle(shape, plan: LinePlan) -> CroftonEstimate:
    """Line-sampling estimate with analytic intersection counts, validating
    the sphere constant and the shadow weights end to end."""
    rng = make_rng(plan.seed, STREAM_SHAPE)
    records = []
    for _ in range(plan.n_lines):
        v, y, weight = sample_line(plan.domain, rng)
        cnt = shape.count(v, y)
        records.append(LineRecord(v=v, y=y, weight=weight, count=cnt, flagged=False))
    return _estimate_from_records(records)


def circle_igm_exact(radius: float) -> float:
    """Closed-form line integral for the circle at d = 2: secant lines carry
    count 2 on offsets |y| < r, so the offset integral is 4r and the full
    measure is c_1 * 2 pi * 4 r = 2 pi r."""
    return crofton_constant(2) * (2.0 * math.pi) * (4.0 * radius)


# realization moments ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentReport:
    """Empirical moments of the per-realization estimates."""

    values: np.ndarray                 # one estimate per realization
    moments: dict                      # order -> (estimate, ci_lo, ci_hi)
    half_moments: dict                 # order -> estimate over the first half
    stability: dict                    # order -> relative change half -> full
    n_realizations: int
    n_flagged_lines: int

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def mean_stderr(self) -> float:
        return float(self.values.std(ddof=1) / math.sqrt(len(self.values)))


def estimate_moments(model: SpectralModel, u: float, plan: LinePlan,
                     n_realizations: int, M: int, seed: int,
                     orders: int = 4, bootstrap: int = 1000,
                     jobs: int = 1) -> MomentReport:
    """Replicate the line-sampling estimate over independent realizations
    and report raw moments 1..orders with bootstrap confidence intervals.

    Requires a finite second spectral moment matrix; rough fields never
    reach the refinement loop.
    """
    if n_realizations < 30:
        raise ModelError("at least 30 realizations required for moment estimates")
    if not model.lambda2_matrix().finite:
        raise GateViolation(
            "realization moments need a finite second spectral moment matrix")
    if orders < 1 or orders > 8:
        raise ModelError("moment orders out of the supported 1..8 range")

    worker_args = [(model, u, plan, M, seed, i) for i in range(n_realizations)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_realization, worker_args, chunksize=8))
    else:
        results = [_one_realization(a) for a in worker_args]

    values = np.array([v for v, _ in results], dtype=float)
    flagged = int(sum(f for _, f in results))

    boot_rng = make_rng(seed, STREAM_BOOTSTRAP)
    n = len(values)
    idx = boot_rng.integers(0, n, size=(bootstrap, n))
    boot = values[idx]

    moments = {}
    half_moments = {}
    stability = {}
    half = values[: n // 2]
    for m in range(1, orders + 1):
        est = float(np.mean(values ** m))
        bm = np.mean(boot ** m, axis=1)
        lo, hi = np.percentile(bm, [2.5, 97.5])
        moments[m] = (est, float(lo), float(hi))
        hm = float(np.mean(half ** m))
        half_moments[m] = hm
        stability[m] = abs(est - hm) / est if est != 0 else 0.0
    return MomentReport(values=values, moments=moments, half_moments=half_moments,
                        stability=stability, n_realizations=n, n_flagged_lines=flagged)


def _one_realization(args):
    model, u, plan, M, seed, index = args
    ens = sample_ensemble(model, M, seed=_realization_seed(seed, index))
    line_plan = LinePlan(n_lines=plan.n_lines, domain=plan.domain,
                         seed=_realization_seed(seed, index),
                         refinement=plan.refinement, h=plan.h)
    est = crofton_estimate(ens, u, line_plan)
    return est.value, est.n_flagged


def _realization_seed(seed: int, index: int) -> int:
    return fold_seed(seed, index)
