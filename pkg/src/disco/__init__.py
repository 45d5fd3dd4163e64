"""Stochastic sampling MPC robust to uncertain simulator parameters.

Parameter uncertainty is estimated by likelihood-free inference with a
mixture density network and pushed through trajectory rollouts with the
unscented transform or Monte Carlo sampling.
"""

from .controller import (ControllerConfig, CostModel, DiscoController, Propagation,
                         aggregate_parameter_costs, importance_weights, roll_plan,
                         sample_perturbations, trajectory_cost, update_nominal)
from .dynamics import (Environment, SimParams, clip_control, make_env, make_pendulum,
                       make_skidsteer, pendulum_step, rollout, skidsteer_step)
from .errors import (ConfigError, DiscoError, InferenceError, InvalidInputError, NumericError,
                     StepError, TrainingError)
from .inference import (GaussianMixture, MdnModel, TrainConfig, TrainingSet, UniformPrior,
                        generate_training_set, mdn_forward, mdn_loss, mdn_loss_gradient,
                        mixture_moments, posterior, summary_statistics, train_mdn)
from .unscented import SigmaSet, UtConfig, sigma_points, unscented_mean, unscented_moments

__version__ = "0.1.0"
