"""Character-level LSTM training and sampling engine.

From-scratch implementation of four training/sampling schemes for next-token
prediction over plain-text corpora: multi-loss, single-loss and conditional
multi-loss training, paired with windowed or progressive sampling, driven by
hand-derived truncated backpropagation through time.
"""

from .bptt import LossSpec, backward, clip_elementwise, cross_entropy, finite_diff_gradient, loss_weights
from .data import Corpus, Split, Vocabulary, batch_offsets, circular_shift, load_corpus, make_batch, split_dataset
from .evaluate import eval_schedule, perplexity
from .model import (
    ForwardTape,
    LstmState,
    ModelConfig,
    Parameters,
    forward_sequence,
    forward_step,
    init_parameters,
    initial_state,
    one_hot,
)
from .numerics import Rng, glorot_uniform_init, leaky_relu, matvec, orthogonal_init, sigmoid, softmax, tanh_act
from .optim import AdamState, adam_step, sgd_step
from .schemes import (
    SchemeId,
    TrainConfig,
    draw_token,
    sample_progressive,
    sample_windowed,
    train,
    train_step_scheme123,
    train_step_scheme4,
)

__all__ = [n for n in dir() if not n.startswith("_")]
