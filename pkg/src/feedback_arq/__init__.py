"""Stop-and-wait retransmission over an unreliable one-bit feedback channel."""
from .blep import BlepModel
from .channel import AsymDetectionParams, FeedbackChannelParams, bep_bpsk, sample_feedback, solve_asym_params
from .schemes import PacketOutcome, RetxPolicy, SchemeConfig, SchemeKind, run_scheme

__version__ = "0.1.0"
