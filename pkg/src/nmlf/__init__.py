"""Neural multiple Lyapunov functions for state-dependent switched systems.

Synthesis (CEGIS training of per-mode tanh-network candidates), sound
certification (interval branch-and-bound over the verification region),
simulation under switching policies, and an SMT-LIB bridge.
"""

from .intervals import EnclosureError, Interval
from .expr import EvalError, Expr, ExprError, ExprSyntaxError, eval_interval, eval_point, parse
from .model import (
    BoxRegion,
    ConfigError,
    Domain,
    Membership,
    Mode,
    SwitchedSystem,
    TimeSemantics,
    interval_membership,
    load_config,
    membership,
    serialize,
    system_from_dict,
    with_arbitrary_switching,
)
from .net import (
    LyapunovNet,
    MLFBundle,
    QuadraticCandidate,
    WeightFormatError,
    decode_weights,
    encode_weights,
    init_bundle,
    init_network,
)
from .loss import (
    LossConfig,
    SampleBank,
    mode_loss_ct,
    mode_loss_dt,
    switch_loss_ct,
    switch_loss_dt,
    total_loss,
    total_loss_and_grads,
)
from .train import CegisReport, TrainConfig, TrainingError, cegis, sample_bank, train_round
from .verify import (
    VerificationOutcome,
    VerifyConfig,
    Violation,
    certify,
    export_smtlib,
    grid_falsify,
    parse_smtlib,
    phi_point,
)
from .sim import (
    StabilityReport,
    SwitchEvent,
    SwitchPolicy,
    Trajectory,
    check_practical_stability,
    sample_initial_states,
    simulate,
    simulate_many,
)
from .benchmarks import BENCHMARKS, builtin_config_path, resolve_config

__version__ = "0.1.0"
