"""Giant-step feature learning on multi-index Gaussian targets.

Library layout:
  hermite     scalar Hermite polynomials, activations, coefficient series
  polynomial  sparse multivariate polynomials with exact Wick calculus
  targets     multi-index targets, data, Hermite tensors, HOSVD, leap index
  staircase   exact subspace-conditioning oracle for the learnable sequence
  network     two-layer net, symmetric init, giant steps, ridge, baselines
  analysis    overlap/alignment diagnostics, spike+bulk, norm and
              orientation predictions
  cget        conditional Gaussian equivalence (CK vs CL features)
  experiments config-driven runner behind the `giantstep` CLI
"""

from .hermite import Activation, HermiteSeries, he_poly, hermite_coeffs, leap_index_1d
from .polynomial import MultivariatePolynomial, parse_polynomial, product_hermite_coeff
from .staircase import (Subspace, conditional_first_hermite, is_staircase_learnable,
                        multi_direction_step_check, staircase_sequence)
from .targets import (Dataset, HermiteTensor, MultiIndexTarget, conditional_variance,
                      hermite_tensor, hosvd, leap_index, make_teacher, sample_dataset)
from .network import (GDTrace, TrainConfig, TwoLayerNet, fit_second_layer, forward,
                      gradient_matrix, init_symmetric, kernel_ridge_baseline,
                      predict_with_reinjection, preprocess_labels, ridge_second_layer,
                      train_first_layer)
from .analysis import (alignment_report, generalization_error, norm_concentration_check,
                       norm_update_oracle, predicted_second_step_orientation,
                       recover_learned_subspace, spike_bulk)
from .cget import (compare_ck_cl, compute_spike, conditional_linear_mass,
                   conditional_moments, lower_bound_check, sample_cl_features)

__version__ = "0.1.0"
