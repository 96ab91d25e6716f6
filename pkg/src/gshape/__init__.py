"""Geometric constellation shaping for the AWGN channel.

Shapes multidimensional constellations by gradient ascent on randomised-
quadrature surrogates of MI and GMI, with Gauss-Hermite and Monte Carlo
reference estimators, baseline generators, SNR-sweep evaluation, and a
CLI for reproducible runs.

Submodules are imported lazily so process-level settings (for example
BLAS thread counts configured by the CLI) can be applied before any
numerical library loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "model",
    "quadrature",
    "kernels",
    "air",
    "generators",
    "optimizer",
    "evaluation",
    "config",
    "cli",
)

_API = {
    "Constellation": "model",
    "BitLabeling": "model",
    "ChannelSpec": "model",
    "AirEstimate": "model",
    "normalize_power": "model",
    "validate": "model",
    "save_constellation": "model",
    "load_constellation": "model",
    "QuadratureSet": "quadrature",
    "Rotation": "quadrature",
    "gh_nodes_1d": "quadrature",
    "gh_tensor": "quadrature",
    "rq_sample": "quadrature",
    "haar_rotation": "quadrature",
    "apply_rotation": "quadrature",
    "default_quadrature_count": "quadrature",
    "mi_gh": "air",
    "gmi_gh": "air",
    "mi_mc": "air",
    "gmi_mc": "air",
    "mi_rq": "air",
    "gmi_rq": "air",
    "capacity_per_2d": "air",
    "coding_metrics": "air",
    "OptimizerConfig": "optimizer",
    "OptimisationRun": "optimizer",
    "surrogate_loss_grad": "optimizer",
    "optimize": "optimizer",
    "snr_sweep": "evaluation",
    "snr_at_air": "evaluation",
    "gain_db": "evaluation",
    "overhead_operating_point": "evaluation",
    "coordinate_gaussianity": "evaluation",
}

__all__ = ["__version__", *_SUBMODULES, *_API]


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    if name in _API:
        module = importlib.import_module(f".{_API[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
