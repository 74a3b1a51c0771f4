"""
Latent video model.

A fixed linear latent codec, a frozen block-matching flow estimator, the
diffusion/dynamics/flow objectives, the zero-initialized control-branch
predictor with its training loop, and world models built on top of it.
"""

from .codec import LatentVideo, encode, decode, latent_shape, write_latent, read_latent
from .flow import FlowField, estimate_flow, flow_loss, flow_discrepancy, write_flow, read_flow
from .objectives import (
    NoiseSchedule, LossWeights, LossParts, noising, velocity_target, reconstruct,
    diffusion_loss, dynamics_loss, flow_lambda, total_loss,
)
from .predictor import LatentPredictor, build_predictor, predictor_forward, save_params, load_params
from .training import TrainConfig, TrainResult, train
from .worlds import SamplerConfig, LearnedWorld, StaticWorld, ddim_sample, learned_predict

__all__ = [
    'LatentVideo', 'encode', 'decode', 'latent_shape', 'write_latent', 'read_latent',
    'FlowField', 'estimate_flow', 'flow_loss', 'flow_discrepancy', 'write_flow', 'read_flow',
    'NoiseSchedule', 'LossWeights', 'LossParts', 'noising', 'velocity_target', 'reconstruct',
    'diffusion_loss', 'dynamics_loss', 'flow_lambda', 'total_loss',
    'LatentPredictor', 'build_predictor', 'predictor_forward', 'save_params', 'load_params',
    'TrainConfig', 'TrainResult', 'train',
    'SamplerConfig', 'LearnedWorld', 'StaticWorld', 'ddim_sample', 'learned_predict',
]
