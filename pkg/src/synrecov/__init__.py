"""Deterministic and stochastic dynamics of vesicle and release-site recovery under sustained stimulation."""
from .model import ImpulseKernel, ModelParams, ParamsError, load_params, paper_defaults

__version__ = "0.1.0"

__all__ = ["ImpulseKernel", "ModelParams", "ParamsError", "load_params", "paper_defaults"]
