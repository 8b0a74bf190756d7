from .aggressive import (
    compute_sigma,
    congestion_avoidance_on_ack,
    enter_maintenance,
    exit_maintenance,
    fast_start_on_ack,
    maintenance_check,
    on_timeout,
    on_triple_dup_ack,
    smoothed_rtt,
)
from .baselines import UnknownAlgorithm, baseline_cc
from .connection import Connection, Receiver, Sender, SenderParams
from .controllers import CC_NAMES, AggressiveCc, BaselineCc, CongestionController, make_controller
from .state import (
    BETA,
    Ack,
    CcState,
    CongestionSignal,
    EmptyHistory,
    Phase,
    RttHistory,
    Segment,
)
