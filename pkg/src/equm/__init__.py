"""Mean-variance efficient policy learning via quadratic-utility policy
gradients, with constrained-baseline learners, synthetic and data-driven
portfolio environments, evaluation metrics and a CLI harness."""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EnumerationBudget,
    IngestError,
    NumericFault,
)
from .rng import RngStream
from .mdp import (
    EnvContract,
    ExactMoments,
    FiniteEnv,
    TabularEnv,
    Trajectory,
    Transition,
    bandit_env,
    binary_tree_env,
    constant_reward_env,
    cumulative_reward,
    enumerate_trajectories,
    exact_mean_and_gradients,
    rollout,
)
from .policy import (
    AdamState,
    LinearSoftmaxPolicy,
    MlpPolicy,
    ValueMlp,
    adam_apply,
    load_policy,
    save_policy,
    softmax,
)
from .learners import (
    AcConfig,
    DoubleSamplingReport,
    TamarConfig,
    TrainResult,
    UtilitySpec,
    XieConfig,
    compare_double_sampling_demo,
    episode_gradient_equm,
    episode_gradient_reinforce,
    score_sum,
    train_equm_ac,
    train_equm_pg,
    train_reinforce,
    train_tamar,
    train_xie,
    xie_dual_step,
)
from .metrics import (
    EvalReport,
    FrontierPoint,
    evaluate,
    max_drawdown,
    mse_to_target,
    pareto_filter,
)
from .envs import (
    AmericanOptionEnv,
    CsvFormatSpec,
    DatasetPortfolioConfig,
    DatasetPortfolioEnv,
    OptionEnvConfig,
    PortfolioSynthConfig,
    PortfolioSynthEnv,
    ReturnsMatrix,
    load_returns_csv,
)

__version__ = "0.1.0"
