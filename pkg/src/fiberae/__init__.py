"""End-to-end learned IM/DD optical links: channel model, FFNN and BRNN
transceivers, training, and sliding-window BER evaluation."""

from .channel import ChannelConfig, channel_forward
from .estimator import BerResult, ber, bits_of, decide, sliding_estimate
from .evaluation import HD_FEC_BER, evaluate_ber
from .trainer import TrainConfig, TrainReport, e2e_loss, sample_batch, train
from .transceiver import BrnnCell, BrnnTransceiver, FfnnTransceiver, brnn_pass, build_model

__version__ = "0.1.0"
