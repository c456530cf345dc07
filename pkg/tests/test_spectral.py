import math

import numpy as np
import pytest
from scipy import integrate, special

from levelgeom import (CosineAtoms, DirectionalSpectrum, IsotropicGaussian, Matern,
                       ModelError, MomentMatrix, OrnsteinUhlenbeck, ProductSplit,
                       RandomPlaneWave, covariance, directional_covariance,
                       directional_lambda2, geman_integral, lambda2_matrix,
                       model_from_config, moment_2_plus_delta, theta)
from levelgeom.spectral import geman_integrand, sin_defect

from conftest import catalog_models, unit_direction

# frozen from the multivariate-t absolute moment
# eta^(s/2) Gamma((1+s)/2) Gamma((eta-s)/2) / (sqrt(pi) Gamma(eta/2)),
# eta = 2 nu = 3, s = 2.5
MATERN_MOMENT_DELTA_HALF = 8.3754437319


def test_covariance_examples():
    assert covariance(IsotropicGaussian(1.0, 1), 0.0) == pytest.approx(1.0, abs=0)
    assert covariance(OrnsteinUhlenbeck(1.0, 1), 1.0) == pytest.approx(math.exp(-1), rel=1e-12)
    at = CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5]))
    assert covariance(at, math.pi) == pytest.approx(-1.0, rel=1e-12)


def test_directional_covariance_examples():
    g = IsotropicGaussian(1.0, 2)
    for v in ([1.0, 0.0], [0.6, 0.8]):
        spec = DirectionalSpectrum(g, v)
        assert directional_covariance(spec, 0.0) == pytest.approx(1.0, abs=0)
        assert directional_covariance(spec, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
    ps = ProductSplit(marginals=(OrnsteinUhlenbeck(1.0, 1), IsotropicGaussian(1.0, 1)))
    spec = DirectionalSpectrum(ps, [1.0, 0.0])
    assert directional_covariance(spec, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_direction_must_be_unit():
    g = IsotropicGaussian(1.0, 2)
    with pytest.raises(ModelError):
        DirectionalSpectrum(g, [1.0, 1.0])


def test_covariance_grid_invariants(catalog):
    taus = np.linspace(-8.0, 8.0, 161)
    for name, model in catalog.items():
        v = unit_direction(model)
        r = np.asarray(model.line_cov(v, taus))
        assert np.all(np.abs(r) <= 1.0 + 1e-12), name
        assert float(model.line_cov(v, 0.0)) == pytest.approx(1.0, abs=1e-14)
        r_neg = np.asarray(model.line_cov(v, -taus))
        assert np.allclose(r, r_neg, atol=1e-13), name


def test_lambda2_matrices():
    m = lambda2_matrix(IsotropicGaussian(1.0, 2))
    assert m.finite
    assert np.allclose(m.entries, np.eye(2))

    m = lambda2_matrix(OrnsteinUhlenbeck(1.0, 1))
    assert not m.finite
    assert math.isinf(m.entries[0, 0])
    assert m.finite_subspace.shape == (1, 0)

    ps = ProductSplit(marginals=(OrnsteinUhlenbeck(1.0, 1), IsotropicGaussian(1.0, 1)))
    m = lambda2_matrix(ps)
    assert not m.finite
    assert math.isinf(m.entries[0, 0]) and m.entries[1, 1] == pytest.approx(1.0)
    assert m.finite_subspace.shape == (2, 1)
    assert np.allclose(m.finite_subspace[:, 0], [0.0, 1.0])
    assert math.isinf(m.quadratic_form([1.0, 0.0]))
    assert m.quadratic_form([0.0, 1.0]) == pytest.approx(1.0)


def test_product_finite_subspace_matches_marginals():
    combos = [
        (OrnsteinUhlenbeck(1.0, 1), IsotropicGaussian(1.0, 1), Matern(nu=0.7, scale=1.0, d=1)),
        (IsotropicGaussian(2.0, 1), Matern(nu=1.5, scale=1.0, d=1)),
    ]
    for marginals in combos:
        ps = ProductSplit(marginals=marginals)
        m = lambda2_matrix(ps)
        finite_axes = [i for i, mg in enumerate(marginals)
                       if math.isfinite(mg.directional_lambda2([1.0]))]
        assert m.finite_subspace.shape == (len(marginals), len(finite_axes))
        for k, i in enumerate(finite_axes):
            e = np.zeros(len(marginals))
            e[i] = 1.0
            assert np.allclose(m.finite_subspace[:, k], e)


def test_directional_lambda2_values():
    assert directional_lambda2(IsotropicGaussian(1.0, 2), [0.6, 0.8]) == pytest.approx(1.0)
    at = CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5]))
    assert directional_lambda2(at, [1.0]) == pytest.approx(1.0)
    ps = ProductSplit(marginals=(OrnsteinUhlenbeck(1.0, 1), IsotropicGaussian(1.0, 1)))
    assert math.isinf(directional_lambda2(ps, [1.0, 0.0]))
    assert directional_lambda2(RandomPlaneWave(2.0, 2), [1.0, 0.0]) == pytest.approx(2.0)
    assert directional_lambda2(Matern(nu=1.5, scale=1.0, d=1), [1.0]) == pytest.approx(3.0)


def test_lambda2_matches_second_difference(catalog):
    for name, model in catalog.items():
        v = unit_direction(model)
        lam2 = model.directional_lambda2(v)
        if not math.isfinite(lam2) or lam2 == 0.0:
            continue
        for h in (1e-3, 1e-4):
            # -(r(h) - 2 + r(-h))/h^2 = 2 (1 - r(h))/h^2 by evenness; the
            # deficit form evaluates it without cancellation at h = 1e-4
            second_diff = 2.0 * float(model.line_cov_deficit(v, h)) / h ** 2
            assert second_diff == pytest.approx(lam2, rel=0.01), (name, h)


def test_moment_2_plus_delta_gaussian_closed_form():
    got = moment_2_plus_delta(IsotropicGaussian(1.0, 1), 1.0)
    assert got == pytest.approx(2.0 * math.sqrt(2.0 / math.pi), rel=1e-10)


def test_moment_2_plus_delta_matern_tail():
    ma = Matern(nu=1.5, scale=1.0, d=1)
    assert math.isinf(moment_2_plus_delta(ma, 1.2))
    got = moment_2_plus_delta(ma, 0.5)
    assert got == pytest.approx(MATERN_MOMENT_DELTA_HALF, rel=1e-8)


def test_moment_2_plus_delta_boundaries_and_gate():
    g = IsotropicGaussian(1.0, 1)
    for bad in (0.0, 2.0, -0.5, 2.5):
        with pytest.raises(ModelError):
            moment_2_plus_delta(g, bad)
    assert math.isinf(moment_2_plus_delta(OrnsteinUhlenbeck(1.0, 2), 0.5))


def test_moment_2_plus_delta_atoms_exact():
    at = CosineAtoms(frequencies=np.array([[1.0], [-1.0], [3.0], [-3.0]]),
                     weights=np.array([0.3, 0.3, 0.2, 0.2]))
    want = 0.6 * 1.0 + 0.4 * 3.0 ** 2.5
    assert moment_2_plus_delta(at, 0.5) == pytest.approx(want, rel=1e-13)
    assert moment_2_plus_delta(RandomPlaneWave(2.0, 2), 0.5) == pytest.approx(2.0 ** 2.5)


def test_moment_2_plus_delta_anisotropic_quadrature_oracle():
    shape = np.array([[2.0, 0.5], [0.5, 1.0]])
    got = moment_2_plus_delta(__import__("levelgeom").AnisotropicGaussian(shape=shape), 1.0)
    # Gauss-Hermite tensor oracle for E (a1 z1^2 + a2 z2^2)^(3/2)
    a = np.linalg.eigvalsh(shape)
    x, w = np.polynomial.hermite_e.hermegauss(220)
    W = np.outer(w, w) / (2.0 * math.pi)
    want = float(np.sum(W * np.add.outer(a[0] * x * x, a[1] * x * x) ** 1.5))
    assert got == pytest.approx(want, rel=1e-5)


def test_moment_2_plus_delta_product_matches_1d_reduction():
    # two independent gaussian axes make |lambda| a chi in 2 dims
    ps = ProductSplit(marginals=(IsotropicGaussian(1.0, 1), IsotropicGaussian(1.0, 1)))
    want = moment_2_plus_delta(IsotropicGaussian(1.0, 2), 1.0)
    assert moment_2_plus_delta(ps, 1.0) == pytest.approx(want, rel=1e-9)
    assert math.isinf(moment_2_plus_delta(
        ProductSplit(marginals=(OrnsteinUhlenbeck(1.0, 1), IsotropicGaussian(1.0, 1))), 0.5))


def test_directional_moment_routes_agree():
    # the theta-integral route of the product model against the closed form
    ps = ProductSplit(marginals=(IsotropicGaussian(1.0, 1), IsotropicGaussian(1.0, 1)))
    for delta, want in ((1.0, 2.0 * math.sqrt(2.0 / math.pi)),
                        (0.5, 2.0 ** 1.25 * special.gamma(1.75) / math.sqrt(math.pi))):
        got = ps.directional_moment_2_plus_delta([0.6, 0.8], delta)
        assert got == pytest.approx(want, rel=1e-6), delta
    ma = Matern(nu=1.5, scale=1.0, d=1)
    assert ma.directional_moment_2_plus_delta([1.0], 0.5) == pytest.approx(
        MATERN_MOMENT_DELTA_HALF, rel=1e-8)
    assert math.isinf(ma.directional_moment_2_plus_delta([1.0], 1.2))


def test_theta_examples():
    g = DirectionalSpectrum(IsotropicGaussian(1.0, 1), [1.0])
    assert theta(g, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert theta(g, 1.0) == pytest.approx(math.exp(-0.5) - 1.0 + 0.5, rel=1e-12)
    at = DirectionalSpectrum(
        CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5])), [1.0])
    assert theta(at, math.pi) == pytest.approx(math.pi ** 2 / 2.0 - 2.0, rel=1e-12)


def test_theta_rejects_infinite_lambda2():
    spec = DirectionalSpectrum(OrnsteinUhlenbeck(1.0, 1), [1.0])
    with pytest.raises(ModelError):
        theta(spec, 1.0)
    with pytest.raises(ModelError):
        geman_integral(spec, 1.0)


def test_theta_nonnegative_on_grid(catalog):
    taus = np.geomspace(1e-3, 2.0, 60)
    for name, model in catalog.items():
        v = unit_direction(model)
        if not math.isfinite(model.directional_lambda2(v)):
            continue
        spec = DirectionalSpectrum(model, v)
        th = np.array([theta(spec, t) for t in taus])
        assert np.all(th >= -1e-12), name
        tp = np.asarray(spec.theta_prime(taus))
        assert np.all(tp >= -1e-12), name


def test_cov_deficit_bound_on_grid(catalog):
    # 1 - r_v(tau) <= lambda2_v tau^2, trivially true on the divergent side
    taus = np.geomspace(1e-3, 10.0, 80)
    for name, model in catalog.items():
        v = unit_direction(model)
        lam2 = model.directional_lambda2(v)
        deficit = np.asarray(model.line_cov_deficit(v, taus))
        if math.isinf(lam2):
            continue
        assert np.all(deficit <= lam2 * taus ** 2 + 1e-12), name


def test_geman_integral_gaussian_quadrature_oracle():
    spec = DirectionalSpectrum(IsotropicGaussian(1.0, 1), [1.0])
    got = geman_integral(spec, 1.0)
    want = integrate.quad(lambda t: 2.0 * (-math.expm1(-t * t / 2.0)) / t, 0.0, 2.0)[0]
    assert got == pytest.approx(want, rel=1e-8)


def test_geman_integral_atoms_closed_form():
    at = DirectionalSpectrum(
        CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5])), [1.0])
    got = geman_integral(at, 1.0)
    # int_0^2 2 (u - sin u)/u^2 du via sine/cosine integrals
    x = 2.0
    si, ci = special.sici(x)
    want = 2.0 * (math.log(x) + math.sin(x) / x - ci - (1.0 - np.euler_gamma))
    assert got == pytest.approx(want, rel=1e-9)


def test_geman_integral_finite_for_catalog(catalog):
    for name, model in catalog.items():
        v = unit_direction(model)
        if not math.isfinite(model.directional_lambda2(v)):
            continue
        val = geman_integral(DirectionalSpectrum(model, v), 1.0)
        assert math.isfinite(val) and val >= 0.0, name


class _HeavyThetaPrime:
    """Duck-typed directional view with theta' ~ tau^(1/2): the integrand
    2 theta'/tau^2 ~ tau^(-3/2) is not integrable at 0."""
    lambda2 = 1.0

    def theta_prime(self, tau):
        return 0.6 * np.sqrt(np.asarray(tau, dtype=float))


def test_geman_integral_divergence_flagged():
    assert math.isinf(geman_integral(_HeavyThetaPrime(), 1.0))


def test_geman_integrand_limit_zero_with_finite_fourth_moment():
    models = [IsotropicGaussian(1.0, 1),
              CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5])),
              RandomPlaneWave(2.0, 2)]
    for model in models:
        spec = DirectionalSpectrum(model, unit_direction(model))
        vals = [float(geman_integrand(spec, t)) for t in (1e-2, 1e-3, 1e-4)]
        assert vals[0] > vals[1] > vals[2] >= 0.0
        assert vals[2] < 1e-3


def test_sine_defect_ratio_constant_stable_under_refinement():
    # sup of (u - sin u) / u^(1+delta) on (0, 100] exists and settles
    for delta in (0.5, 1.0, 1.5):
        sups = []
        for n in (20001, 40001):
            u = np.linspace(1e-6, 100.0, n)
            ratio = sin_defect(u) / u ** (1.0 + delta)
            sups.append(float(ratio.max()))
        assert math.isfinite(sups[0])
        assert sups[1] == pytest.approx(sups[0], rel=1e-2)
        assert np.all(sin_defect(np.linspace(0, 100, 1001)) >= 0.0)


def test_config_roundtrip(catalog):
    for name, model in catalog.items():
        rebuilt = model_from_config(model.to_config())
        assert type(rebuilt) is type(model)
        taus = np.linspace(0.0, 3.0, 7)
        v = unit_direction(model)
        assert np.allclose(model.line_cov(v, taus), rebuilt.line_cov(v, taus), atol=1e-14), name


def test_config_rejects_unknown_keys():
    with pytest.raises(ModelError):
        model_from_config({"family": "isotropic_gaussian", "dimension": "1", "scale": "1.0",
                           "bogus": "1"})
    with pytest.raises(ModelError):
        model_from_config({"family": "unobtainium", "dimension": "1"})


def test_model_validation():
    with pytest.raises(ModelError):
        Matern(nu=0.5, scale=1.0, d=1)
    with pytest.raises(ModelError):
        IsotropicGaussian(scale=-1.0, d=1)
    with pytest.raises(ModelError):
        CosineAtoms(frequencies=np.array([[1.0]]), weights=np.array([1.0]))  # no mirror
    with pytest.raises(ModelError):
        CosineAtoms(frequencies=np.array([[1.0], [-1.0]]), weights=np.array([0.9, 0.5]))
    with pytest.raises(ModelError):
        MomentMatrix.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))  # not PSD


def test_moment_matrix_quadratic_form_conventions():
    m = MomentMatrix.from_matrix(np.array([[np.inf, 0.0], [0.0, 2.0]]))
    assert math.isinf(m.quadratic_form([1e-12, 1.0]))
    assert m.quadratic_form([0.0, 1.0]) == pytest.approx(2.0)


def test_spectral_sampling_matches_lambda2(catalog):
    # sample second moments along a direction against the analytic value
    from levelgeom.rng import make_rng
    for name in ("iso_gauss_2d", "atoms_mix", "plane_wave", "matern15", "aniso_gauss"):
        model = catalog[name]
        v = unit_direction(model)
        lam2 = model.directional_lambda2(v)
        lams = model.spectral_sample(make_rng(17, 1), 200_000)
        proj = lams @ v
        emp = float(np.mean(proj ** 2))
        se = float(np.std(proj ** 2) / math.sqrt(len(proj)))
        assert abs(emp - lam2) < 4.0 * se + 1e-9, (name, emp, lam2)
