"""Learning ground-state properties of parameterized spin-1/2 systems.

Modules cover the lattice Hamiltonian family and its geometry, exact
diagonalization, classical shadows, the geometric feature maps with
ridge/LASSO regression, the local tanh-network model, quasi-Monte Carlo
point sets and diagnostics, and the experiment harness.
"""

from .eigensolver import (GroundStateSolution, SolverConfig, expectation,
                          ground_state, pauli_expectation)
from .errors import (CapacityError, ConfigError, ConvergenceError,
                     DensityError, FeatureBlowupError, GslearnError)
from .featuremap import (FeatureSpace, FeatureVector, HyperParams,
                         delta2_default, feature_batch, lattice_points,
                         locate_cell, phi, phi_tilde)
from .lattice import (Lattice, LocalTerm, Observable, ParamHamiltonian,
                      PauliString, assemble_matrix, build_heisenberg,
                      build_heisenberg_allpairs, enumerate_geo_paulis,
                      inverse_map_couplings, local_coordinates,
                      map_couplings, obs_distance)
from .linear_models import (LinearModel, lasso_fit, predict, predict_batch,
                            ridge_fit)
from .neuralnet import (CombinedModel, LocalMLP, TrainConfig, forward,
                        init_model, loss_and_grad, train, weight_report)
from .qmc import (PointSet, ProductDensity, hk_variation_upper,
                  inverse_transform, koksma_hlawka_check, sobol_points,
                  star_discrepancy, uniform_points)
from .shadows import (ShadowRecord, estimate_observable, estimate_pauli,
                      sample_shadow)

__version__ = "0.1.0"
