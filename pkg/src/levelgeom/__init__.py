"""Level-set geometry of stationary Gaussian random fields.

Spectral model catalog, closed-form crossing-rate and expected-volume
formulas, exact one-dimensional simulation, harmonic-superposition field
realizations, and Monte-Carlo line-sampling estimation of level-set volume.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, EmbeddingError, GateViolation, ModelError,
                     NumericalError, RefinementError)
from .spectral import (AnisotropicGaussian, CosineAtoms, DirectionalSpectrum,
                       IsotropicGaussian, Matern, MomentMatrix, OrnsteinUhlenbeck,
                       ProductSplit, RandomPlaneWave, SpectralModel, covariance,
                       directional_covariance, directional_lambda2, geman_integral,
                       lambda2_matrix, model_from_config, moment_2_plus_delta, theta)
from .kacrice import (Ball, Box, LevelDomain, RiceValue, conditional_mean_derivative,
                      conditional_variance_derivative, crofton_constant,
                      expected_crossings_1d, expected_volume, f_lambda2_mc,
                      f_lambda2_sphere, second_factorial_moment_1d)
from .fieldsim import (CirculantSampler, HarmonicEnsemble, LineGrid, count_crossings,
                       count_sign_changes, evaluate_field, refine_crossings,
                       sample_ensemble, sample_line_exact)
from .crofton import (CroftonEstimate, LinePlan, MomentReport, SphereShape,
                      crofton_estimate, deterministic_shape_oracle, estimate_moments,
                      sample_line, segment_in_domain, shadow_measure)
