"""Signal matrix model predictive control.

Build a data-driven model from one recorded trajectory, predict future
outputs with the minimum-variance unbiased predictor and close the loop with
a receding-horizon QP. DeePC, SPC and a true-model MPC serve as baselines.
"""

from .control import (ControlSpec, Controller, build_deepc_qp, build_mpc_qp, build_smmpc_qp,
                      model_predictor, receding_horizon_step)
from .errors import (ConfigError, DegenerateOrderError, DimensionError, ExcitationError,
                     InfeasibleError, NumericalError, SmmpcError, UnsupportedOperation)
from .harness import (Scenario, SimulationResult, compute_indices, export, run_closed_loop,
                      run_monte_carlo)
from .linalg import build_hankel, lq_factorize, numerical_rank
from .plant import (DataRecord, NoiseModel, StateSpace, check_persistency, collect_record,
                    generate_pe_input, random_stable_plant, simulate)
from .predictor import (PredictorMatrices, build_blue_predictor, build_spc_predictor, predict,
                        predictor_covariance)
from .qp import QpProblem, QpResult, solve_qp
from .signal_matrix import (HankelSet, OrderMode, SignalMatrixModel, build_hankel_set, build_smm,
                            trajectory_membership)

__version__ = "0.1.0"
