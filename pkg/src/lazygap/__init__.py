"""Risk asymptotics and finite-size oracles for two-layer quadratic networks.

Compares three training regimes of a width-N two-layer network on two data
models (noiseless quadratic target, two-component Gaussian mixture):

* RF: frozen random first layer, trained second layer;
* NT: first-order linearization trained in its per-neuron directions;
* NN: fully trained first layer via one-pass SGD.

``theory`` holds the closed-form large-(N, d) predictions, ``oracle`` the
exact finite-size risks they are verified against, ``dynamics`` the SGD and
landscape machinery, and ``harness`` the CLI/CSV experiment layer.
"""

from .activation import (ActivationProfile, activation_profile, hermite_eval,
                         profile_for, register_activation)
from .spectra import (FeatureEnsemble, MixtureMg, SpectrumSpec, TargetQf,
                      empirical_spectrum, make_gamma, make_mg_instance,
                      make_qf_target, sample_features)
from .stieltjes import PsiSolution, effective_resolvent, solve_psi
from .theory import (RiskPrediction, nn_mg_risk, nn_qf_risk,
                     nt_mg_risk_isotropic, nt_qf_risk, rf_mg_risk, rf_qf_risk,
                     rf_qf_risk_quadratic)
from .oracle import (BayesEstimate, KernelMoments, QuadModel, bayes_risk_mg,
                     kernel_approx_error, nn_opt_quadmodel, nt_exact_risk_mg,
                     nt_exact_risk_qf, quad_population_risk, quad_risk_gradient,
                     rf_exact_risk, rf_kernel_moments_quadratic, rf_mc_moments)
from .dynamics import (NnState, NtState, SgdConfig, SgdTrace,
                       critical_points_qf, gradient_flow_run,
                       hessian_quadratic_form, init_nn_state,
                       nn_population_gradient, nn_sgd_run, nt_sgd_run,
                       strict_saddle_certificate)
from .datagen import SampleBatch, batch_at, sample_batch

__version__ = "0.1.0"
