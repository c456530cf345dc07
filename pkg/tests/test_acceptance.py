"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines and the
elapsed time against each runtime budget.  Every tolerance is pinned here.
"""

import math
import os
import time

import numpy as np
import pytest

from levelgeom import (Ball, Box, CosineAtoms, DirectionalSpectrum, IsotropicGaussian,
                       LevelDomain, LinePlan, Matern, ModelError, MomentMatrix,
                       OrnsteinUhlenbeck, RandomPlaneWave, SphereShape,
                       conditional_mean_derivative, conditional_variance_derivative,
                       crofton_estimate, deterministic_shape_oracle, estimate_moments,
                       expected_crossings_1d, f_lambda2_mc, f_lambda2_sphere,
                       geman_integral, moment_2_plus_delta, sample_ensemble,
                       second_factorial_moment_1d, theta)
from levelgeom.fieldsim import CirculantSampler, count_sign_changes, expected_grid_sign_changes
from levelgeom.rng import make_rng

from conftest import catalog_models, isotropic_f_closed, random_pd_matrix, unit_direction

_JOBS = min(2, os.cpu_count() or 1)


def _report(tag, ok, detail, t0, budget):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {tag}: {status} [{time.time() - t0:6.1f}s / budget {budget}s] {detail}")
    return ok


def test_acceptance_01_closed_form_sphere_functional():
    t0 = time.time()
    worst = 0.0
    for d in (1, 2, 3, 4):
        for lam2 in (0.25, 1.0, 4.0):
            got = f_lambda2_sphere(MomentMatrix.isotropic(lam2, d)).value
            worst = max(worst, abs(got - isotropic_f_closed(lam2, d)) / isotropic_f_closed(lam2, d))
    pin = [abs(f_lambda2_sphere(MomentMatrix.isotropic(1.0, d)).value - v) / v
           for d, v in ((1, 1.0 / math.pi), (2, 0.5), (3, 2.0 / math.pi))]
    ok = worst < 1e-6 and max(pin) < 1e-6 and time.time() - t0 < 1.0
    assert _report("1", ok, f"max rel err {worst:.2e}", t0, 1)


def test_acceptance_02_gaussian_mc_matches_sphere():
    t0 = time.time()
    rng = make_rng(2024, 0)
    worst_z = 0.0
    for k in range(20):
        d = (1, 2, 3)[k % 3]
        m = MomentMatrix.from_matrix(random_pd_matrix(rng, d))
        sph = f_lambda2_sphere(m)
        mc = f_lambda2_mc(m, n=10 ** 6, seed=100 + k)
        z = abs(sph.value - mc.value) / math.hypot(mc.stderr, sph.stderr)
        worst_z = max(worst_z, z)
    ok = worst_z < 3.0 and time.time() - t0 < 30.0
    assert _report("2", ok, f"worst |z| {worst_z:.2f} over 20 matrices", t0, 30)


def test_acceptance_03_crossing_rate_circulant():
    t0 = time.time()
    g1 = IsotropicGaussian(1.0, 1)
    T, h, n_real = 10.0, 1e-3, 10 ** 4
    n = int(T / h) + 1
    sampler = CirculantSampler(g1, [1.0], h, n)
    counts = np.empty(n_real)
    for i in range(n_real):
        x = sampler.sample(make_rng(33, i), 1)[0]
        counts[i] = count_sign_changes(x, 0.0)
    mean = counts.mean()
    se = counts.std(ddof=1) / math.sqrt(n_real)
    want = 10.0 / math.pi
    ok = abs(mean - want) < 3.0 * se and time.time() - t0 < 120.0
    assert _report("3", ok, f"mean {mean:.4f} vs {want:.4f} (3se = {3 * se:.4f})", t0, 120)


def test_acceptance_04_crofton_constants_end_to_end():
    t0 = time.time()
    plan2 = LinePlan(n_lines=10 ** 5, domain=LevelDomain(0.0, Ball(np.zeros(2), 1.1)), seed=44)
    est2 = deterministic_shape_oracle(SphereShape(np.zeros(2), 1.0), plan2)
    plan3 = LinePlan(n_lines=10 ** 5, domain=LevelDomain(0.0, Ball(np.zeros(3), 1.1)), seed=45)
    est3 = deterministic_shape_oracle(SphereShape(np.zeros(3), 1.0), plan3)
    ok2 = abs(est2.value - 2 * math.pi) < 3 * est2.stderr and \
        abs(est2.value - 2 * math.pi) / (2 * math.pi) < 0.005
    ok3 = abs(est3.value - 4 * math.pi) < 3 * est3.stderr and \
        abs(est3.value - 4 * math.pi) / (4 * math.pi) < 0.005
    ok = ok2 and ok3 and time.time() - t0 < 30.0
    assert _report("4", ok, f"circle {est2.value:.4f} (2pi), sphere {est3.value:.4f} (4pi)", t0, 30)


def test_acceptance_05_expected_volume_grand_mean():
    t0 = time.time()
    g2 = IsotropicGaussian(1.0, 2)
    dom = LevelDomain(0.0, Box(np.zeros(2), np.ones(2)))
    plan = LinePlan(n_lines=400, domain=dom, seed=0, refinement=True)
    details = []
    ok = True
    for u, want in ((0.0, 0.5), (1.0, 0.5 * math.exp(-0.5))):
        rep = estimate_moments(g2, u, plan, n_realizations=200, M=512, seed=505,
                               jobs=_JOBS)
        z = abs(rep.mean - want) / rep.mean_stderr
        flagged = rep.n_flagged_lines / (200 * plan.n_lines)
        details.append(f"u={u}: {rep.mean:.4f} vs {want:.4f} (|z| {z:.2f})")
        ok = ok and z < 3.0 and flagged < 1e-3
    ok = ok and time.time() - t0 < 600.0
    assert _report("5", ok, "; ".join(details), t0, 600)


def test_acceptance_06_divergence_signature():
    t0 = time.time()
    ou = OrnsteinUhlenbeck(1.0, 1)
    T, n_real = 1.0, 200
    sweep = (1e-2, 1e-3, 1e-4, 1e-5)
    means = []
    ok = True
    for h in sweep:
        n = int(T / h) + 1
        sampler = CirculantSampler(ou, [1.0], h, n)
        counts = np.array([count_sign_changes(sampler.sample(make_rng(66, i), 1)[0], 0.0)
                           for i in range(n_real)], dtype=float)
        mean = counts.mean()
        se = counts.std(ddof=1) / math.sqrt(n_real)
        oracle = expected_grid_sign_changes(ou, [1.0], T, h)
        ok = ok and abs(mean - oracle) < 3.0 * se
        means.append(mean)
    increasing = all(b > a for a, b in zip(means, means[1:]))
    slope = float(np.polyfit(np.log(sweep), np.log(means), 1)[0])
    ok = ok and increasing and -0.6 < slope < -0.4 and time.time() - t0 < 300.0
    assert _report("6", ok, f"slope {slope:.3f}, means {['%.1f' % m for m in means]}", t0, 300)


def test_acceptance_07a_second_factorial_moment_gaussian():
    t0 = time.time()
    g1 = IsotropicGaussian(1.0, 1)
    spec = DirectionalSpectrum(g1, [1.0])
    quad = second_factorial_moment_1d(spec, 0.0, 1.0, "all")
    T, h, n_real = 1.0, 1e-3, 10 ** 5
    n = int(T / h) + 1
    sampler = CirculantSampler(g1, [1.0], h, n)
    rng = make_rng(77, 0)
    vals = np.empty(n_real)
    done = 0
    while done < n_real:
        batch = sampler.sample(rng, min(4096, n_real - done))
        above = batch >= 0.0
        counts = (above[:, 1:] != above[:, :-1]).sum(axis=1)
        vals[done:done + len(batch)] = counts * (counts - 1.0)
        done += len(batch)
    emp = vals.mean()
    se = vals.std(ddof=1) / math.sqrt(n_real)
    ok = abs(emp - quad) < 3.0 * se and time.time() - t0 < 300.0
    assert _report("7a", ok, f"quadrature {quad:.5f} vs MC {emp:.5f} (3se {3 * se:.5f})", t0, 300)


@pytest.mark.xfail(strict=True, reason=(
    "Unattainable as specified: for the two-degree-of-freedom cosine process the "
    "conditional derivative pair given X(0)=X(tau)=0 is a.s. degenerate for every "
    "tau outside pi Z (its conditional variance lambda2 - r'^2/(1-r^2) is "
    "identically 0), so the density-weighted integrand vanishes and the regular "
    "1-D integral cannot see the pair mass, which sits in a singular atom at "
    "separation pi; E[N(N-1)] = 2 is real but not reachable by this quadrature, "
    "whose own precondition (conditional variance > 0) the model violates."))
def test_acceptance_07b_second_factorial_moment_cosine():
    t0 = time.time()
    at = CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5]))
    spec = DirectionalSpectrum(at, [1.0])
    try:
        val = second_factorial_moment_1d(spec, 0.0, 2.0 * math.pi, "all")
    except ModelError as exc:
        _report("7b", False, f"quadrature refused: {exc}", t0, 300)
        raise AssertionError("degenerate conditional covariance") from exc
    ok = abs(val - 2.0) < 1e-3
    _report("7b", ok, f"quadrature {val:.6f} vs 2", t0, 300)
    assert ok


def test_acceptance_08_spectral_criteria():
    t0 = time.time()
    ma = Matern(nu=1.5, scale=1.0, d=1)
    ok = math.isinf(moment_2_plus_delta(ma, 1.2))
    ok = ok and math.isfinite(moment_2_plus_delta(ma, 0.5))
    details = ["matern moment flags ok"]
    taus = np.geomspace(1e-3, 2.0, 50)
    wide = np.geomspace(1e-3, 10.0, 60)
    for name, model in catalog_models().items():
        v = unit_direction(model)
        lam2 = model.directional_lambda2(v)
        deficit = np.asarray(model.line_cov_deficit(v, wide))
        if math.isfinite(lam2):
            spec = DirectionalSpectrum(model, v)
            g = geman_integral(spec, 1.0)
            ok = ok and math.isfinite(g) and g >= 0.0
            th = np.array([theta(spec, float(t)) for t in taus])
            ok = ok and bool(np.all(th >= -1e-12))
            ok = ok and bool(np.all(deficit <= lam2 * wide ** 2 + 1e-12))
    ok = ok and time.time() - t0 < 10.0
    assert _report("8", ok, "; ".join(details), t0, 10)


def test_acceptance_09_smooth_field_moment_stability():
    t0 = time.time()
    pw = RandomPlaneWave(wavenumber=2.0 * math.pi, d=2)
    dom = LevelDomain(0.0, Box(np.zeros(2), np.ones(2)))
    plan = LinePlan(n_lines=200, domain=dom, seed=0, refinement=True)
    rep = estimate_moments(pw, 0.0, plan, n_realizations=400, M=512, seed=909,
                           jobs=_JOBS)
    ok = all(math.isfinite(rep.moments[m][0]) for m in range(1, 5))
    worst = max(rep.stability[m] for m in range(1, 5))
    ok = ok and rep.n_flagged_lines / (400 * plan.n_lines) < 1e-3
    ok = ok and worst < 0.2 and time.time() - t0 < 900.0
    detail = (f"moments {[round(rep.moments[m][0], 3) for m in range(1, 5)]}, "
              f"worst doubling change {worst:.1%}")
    assert _report("9", ok, detail, t0, 900)


def test_acceptance_10_regression_formulas_vs_simulation():
    t0 = time.time()
    g1 = IsotropicGaussian(1.0, 1)
    spec = DirectionalSpectrum(g1, [1.0])
    lam2 = 1.0
    eps_by_tau = {0.5: 0.02, 1.0: 0.04, 2.0: 0.05}
    target = 20000
    ok = True
    details = []
    for tau, eps in eps_by_tau.items():
        r = float(spec.cov(tau))
        rp = float(spec.dcov(tau))
        cov = np.array([[1.0, r, 0.0], [r, 1.0, -rp], [0.0, -rp, lam2]])
        L = np.linalg.cholesky(cov)
        for u in (0.0, 1.0):
            rng = make_rng(1010, int(tau * 10), int(u))
            kept = []
            while sum(len(k) for k in kept) < target:
                z = rng.standard_normal((4_000_000, 3)) @ L.T
                sel = (np.abs(z[:, 0] - u) < eps) & (np.abs(z[:, 1] - u) < eps)
                kept.append(z[sel, 2])
            sample = np.concatenate(kept)
            m_emp = sample.mean()
            v_emp = sample.var(ddof=1)
            n = len(sample)
            m_want = conditional_mean_derivative(spec, tau, u)
            v_want = conditional_variance_derivative(spec, tau)
            se_mean = sample.std(ddof=1) / math.sqrt(n)
            se_var = v_emp * math.sqrt(2.0 / n)
            zm = abs(m_emp - m_want) / se_mean
            zv = abs(v_emp - v_want) / se_var
            ok = ok and zm < 3.0 and zv < 3.0
            details.append(f"tau={tau},u={u}: zm {zm:.2f}, zv {zv:.2f}")
    ok = ok and time.time() - t0 < 120.0
    assert _report("10", ok, "; ".join(details), t0, 120)
