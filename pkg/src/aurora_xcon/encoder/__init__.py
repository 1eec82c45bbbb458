from .diagnostics import clustered_trajectories, latent_diagnostics, silhouette
from .model import EncoderModel, encode
from .objectives import (
    TripletSet,
    adaptive_margin,
    mine_triplets,
    mse_loss_and_grad,
    triplet_hinge,
    triplet_loss,
    triplet_loss_and_grad,
)
from .training import EncoderDivergedError, TrainConfig, TrainResult, schedule_until, train, update_schedule

__all__ = [
    "clustered_trajectories", "latent_diagnostics", "silhouette",
    "EncoderModel", "encode",
    "TripletSet", "adaptive_margin", "mine_triplets", "mse_loss_and_grad", "triplet_hinge",
    "triplet_loss", "triplet_loss_and_grad",
    "EncoderDivergedError", "TrainConfig", "TrainResult", "schedule_until", "train", "update_schedule",
]
