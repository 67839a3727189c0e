from .blocks import (
    encoder_layer,
    nae_embed,
    sinusoidal_pe,
    tdab_forward,
    tdab_index,
    tdab_reshape,
    tdab_unreshape,
    vdab_forward,
)
from .config import ConfigError, ModelConfig
from .network import DeformTime, model_forward
from .params import ParameterStore, init_params, param_shapes
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .opcount import measured_op_count, predicted_op_count
