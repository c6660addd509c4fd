"""Key-value memory networks for knowledge tracing, with MANN and LSTM baselines."""

from . import analysis, diffcore, dkt, dkvmn, encoding, mann, metrics, synthgen, trainer
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__version__ = "0.1.0"
