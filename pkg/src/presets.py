"""
Named run configurations for the benchmark cases.

Each preset lists only the keys that differ from the schema defaults,
grouped by configuration section exactly as in a JSON run file.
"""

import copy
import math

from constants import MAX_PERTURBATION

PI_BOUNDS = [[-math.pi, math.pi], [-math.pi, math.pi], [-math.pi, math.pi]]

RUN_PRESETS = {
    "freestream": {
        "run": {"case": "freestream", "label": "freestream preservation"},
        "mesh": {"elements": [4, 4, 4], "degrees": [2, 3, 4], "amplitude": MAX_PERTURBATION},
        "physics": {"velocity": [0.3, -0.2, 0.1], "pressure": 0.7142857142857143},
        "integrator": {"t_end": 1.0},
        "checks": {"max_initial_residual": 1e-11, "max_state_drift": 1e-10,
                   "max_conservation_drift": 1e-6}
    },
    "vortex_entropy": {
        "run": {"case": "vortex", "label": "entropy conservation"},
        "mesh": {"elements": [6, 6, 6], "degrees": [2, 3, 4], "amplitude": MAX_PERTURBATION},
        "scheme": {"dissipation": False},
        "integrator": {"t_end": 0.5},
        "checks": {"max_entropy_rate": 1e-9, "max_conservation_drift": 1e-6}
    },
    "vortex": {
        "run": {"case": "vortex", "label": "vortex convergence"},
        "mesh": {"elements": [4, 4, 4], "degrees": [2, 3], "amplitude": MAX_PERTURBATION,
                 "boundary": "dirichlet"},
        "integrator": {"t_end": 2.0},
        "checks": {"entropy_nonincreasing": 1e-9}
    },
    "tgv": {
        "run": {"case": "tgv", "label": "inviscid Taylor-Green vortex"},
        "mesh": {"elements": [4, 4, 4], "bounds": PI_BOUNDS, "degrees": [2, 3, 4, 5],
                 "amplitude": MAX_PERTURBATION},
        "physics": {"mach": 0.05},
        "integrator": {"t_end": 2.0, "log_every": 20},
        "checks": {"entropy_nonincreasing": 1e-9, "max_conservation_drift": 1e-6}
    },
    "convection": {
        "run": {"case": "convection", "label": "linear convection"},
        "mesh": {"elements": [3, 3, 3], "degrees": [2, 3], "amplitude": MAX_PERTURBATION},
        "physics": {"velocity": [1.0, 0.5, 0.25], "profile": "sine"},
        "integrator": {"t_end": 1.0},
        "checks": {"entropy_nonincreasing": 1e-9, "max_conservation_drift": 1e-6}
    },
    "burgers": {
        "run": {"case": "burgers", "label": "Burgers"},
        "mesh": {"elements": [3, 3, 3], "degrees": [2, 3], "amplitude": MAX_PERTURBATION},
        "physics": {"profile": "sine"},
        "integrator": {"t_end": 0.5},
        "checks": {"entropy_nonincreasing": 1e-9, "max_conservation_drift": 1e-6}
    }
}


def get_preset_names():
    """Get list of available preset names."""
    return list(RUN_PRESETS.keys())


def get_preset_settings(preset_name: str):
    """Get a copy of the sectioned settings of a preset ({} if unknown)."""
    return copy.deepcopy(RUN_PRESETS.get(preset_name, {}))
