from .adam import AdamState, adam_step
from .lstm import LstmParams, NumericError, init_lstm, lstm_backward, lstm_forward, sigmoid
from .network import (
    ConfigError,
    DenseParams,
    NetworkParams,
    ShapeError,
    backward,
    dropout_apply,
    forward,
    init_network,
    loss_and_grads,
    mse_loss,
)
from .training import (
    ModelConfig,
    TrainedModel,
    TrainingDivergedError,
    evaluate_loss,
    load_model,
    predict,
    save_model,
    train,
)
