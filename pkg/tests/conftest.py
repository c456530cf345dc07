import math

import numpy as np
import pytest

from levelgeom import (AnisotropicGaussian, CosineAtoms, IsotropicGaussian, Matern,
                       OrnsteinUhlenbeck, ProductSplit, RandomPlaneWave)


def catalog_models():
    """One representative per family, the workhorses of the property tests."""
    g1 = IsotropicGaussian(scale=1.0, d=1)
    return {
        "iso_gauss_1d": g1,
        "iso_gauss_2d": IsotropicGaussian(scale=1.0, d=2),
        "aniso_gauss": AnisotropicGaussian(shape=np.array([[2.0, 0.5], [0.5, 1.0]])),
        "matern15": Matern(nu=1.5, scale=1.0, d=1),
        "ou": OrnsteinUhlenbeck(rate=1.0, d=1),
        "atoms": CosineAtoms(frequencies=np.array([[1.0], [-1.0]]),
                             weights=np.array([0.5, 0.5])),
        "atoms_mix": CosineAtoms(frequencies=np.array([[1.0], [-1.0], [2.5], [-2.5]]),
                                 weights=np.array([0.25, 0.25, 0.25, 0.25])),
        "plane_wave": RandomPlaneWave(wavenumber=2.0, d=2),
        "product_ou_gauss": ProductSplit(marginals=(OrnsteinUhlenbeck(rate=1.0, d=1), g1)),
        "product_gauss": ProductSplit(marginals=(g1, IsotropicGaussian(scale=0.7, d=1))),
    }


@pytest.fixture(scope="session")
def catalog():
    return catalog_models()


def unit_direction(model):
    v = np.zeros(model.d)
    v[0] = 1.0
    if model.d > 1:
        v = np.ones(model.d) / math.sqrt(model.d)
    return v


def isotropic_f_closed(lam2: float, d: int) -> float:
    """Independent closed form for the sphere functional of lam2 * I."""
    return math.sqrt(lam2) * math.gamma((d + 1) / 2.0) / (math.sqrt(math.pi) * math.gamma(d / 2.0))


def random_pd_matrix(rng, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    m = a @ a.T + 0.1 * np.eye(d)
    return m
