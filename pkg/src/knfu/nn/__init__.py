from .model import Model, ModelSpec, build_model, forward, m1_spec, m2_spec, mlp_spec
from .losses import EPS_LOG, ce_loss, kl_loss, softmax, sharpen
from .train import GRAD_CAP, SgdState, backward_step, gradient_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Model",
    "ModelSpec",
    "build_model",
    "forward",
    "m1_spec",
    "m2_spec",
    "mlp_spec",
    "EPS_LOG",
    "ce_loss",
    "kl_loss",
    "softmax",
    "sharpen",
    "GRAD_CAP",
    "SgdState",
    "backward_step",
    "gradient_check",
    "load_checkpoint",
    "save_checkpoint",
]
