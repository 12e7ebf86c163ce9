from ghair.optim.losses import (
    LossWeights,
    loss_alpha,
    loss_orientation,
    loss_photometric,
    loss_strand_smoothness,
)
from ghair.optim.chamfer import loss_geo
from ghair.optim.backward import GradBuffer, backward
from ghair.optim.sgd import OptimState, step
from ghair.optim.density import density_control

__all__ = [
    "LossWeights",
    "loss_alpha",
    "loss_orientation",
    "loss_photometric",
    "loss_strand_smoothness",
    "loss_geo",
    "GradBuffer",
    "backward",
    "OptimState",
    "step",
    "density_control",
]
