"""
Constants and Schema definitions for the entropy-stable SBP solver.
"""

VERSION = "1.0.0"

# Exit codes reported by main.py
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_GCL_INFEASIBLE = 3
EXIT_INTEGRATION = 4

MAX_DEGREE = 12
DEFAULT_GAMMA = 1.4
DEFAULT_TOLERANCE = 1e-8
MAX_PERTURBATION = 1.0 / 15.0

CASES = ("vortex", "tgv", "freestream", "convection", "burgers")

# Run configuration schema. Every key lives in one section of the JSON file;
# "default" is used when the key is absent.
CONFIG_SCHEMA = {
    # Run
    "case": {
        "label": "Test case",
        "section": "run",
        "type": "choice",
        "options": list(CASES),
        "default": "freestream"
    },
    "label": {
        "label": "Run label",
        "section": "run",
        "type": "str",
        "default": ""
    },
    # Mesh
    "elements": {
        "label": "Elements per axis",
        "section": "mesh",
        "type": "int_triple",
        "range": (1, 512),
        "default": [4, 4, 4]
    },
    "bounds": {
        "label": "Domain bounds per axis",
        "section": "mesh",
        "type": "interval_triple",
        "default": [[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]
    },
    "degrees": {
        "label": "Solution degree set",
        "section": "mesh",
        "type": "int_list",
        "range": (1, MAX_DEGREE),
        "default": [2, 3]
    },
    "seed": {
        "label": "Degree assignment seed",
        "section": "mesh",
        "type": "int",
        "range": (0, 2**63 - 1),
        "default": 0
    },
    "amplitude": {
        "label": "Control node perturbation amplitude",
        "section": "mesh",
        "type": "float",
        "range": (0.0, MAX_PERTURBATION),
        "default": MAX_PERTURBATION
    },
    "geometry_degree": {
        "label": "Geometric map degree (0 = automatic)",
        "section": "mesh",
        "type": "int",
        "range": (0, 2),
        "default": 0
    },
    "boundary": {
        "label": "Boundary treatment",
        "section": "mesh",
        "type": "choice",
        "options": ["periodic", "dirichlet"],
        "default": "periodic"
    },
    # Physics
    "gamma": {
        "label": "Ratio of specific heats",
        "section": "physics",
        "type": "float",
        "range": (1.0 + 1e-6, 5.0 / 3.0),
        "default": DEFAULT_GAMMA
    },
    "mach": {
        "label": "Reference Mach number",
        "section": "physics",
        "type": "float",
        "range": (0.0, 5.0),
        "default": 0.5
    },
    "vortex_strength": {
        "label": "Vortex strength",
        "section": "physics",
        "type": "float",
        "range": (0.0, 20.0),
        "default": 5.0
    },
    "angle": {
        "label": "Advection angle (degrees)",
        "section": "physics",
        "type": "float",
        "range": (-360.0, 360.0),
        "default": 45.0
    },
    "center": {
        "label": "Vortex center",
        "section": "physics",
        "type": "float_triple",
        "default": [0.0, 0.0, 0.0]
    },
    "velocity": {
        "label": "Convection velocity / freestream velocity",
        "section": "physics",
        "type": "float_triple",
        "default": [1.0, 0.5, 0.25]
    },
    "density": {
        "label": "Freestream density",
        "section": "physics",
        "type": "float",
        "range": (1e-12, 1e12),
        "default": 1.0
    },
    "pressure": {
        "label": "Freestream pressure",
        "section": "physics",
        "type": "float",
        "range": (1e-12, 1e12),
        "default": 1.0
    },
    "reference_velocity": {
        "label": "Taylor-Green reference velocity V0",
        "section": "physics",
        "type": "float",
        "range": (1e-12, 1e6),
        "default": 1.0
    },
    "reference_density": {
        "label": "Taylor-Green reference density rho0",
        "section": "physics",
        "type": "float",
        "range": (1e-12, 1e6),
        "default": 1.0
    },
    "length_scale": {
        "label": "Taylor-Green length scale L",
        "section": "physics",
        "type": "float",
        "range": (1e-12, 1e6),
        "default": 1.0
    },
    "profile": {
        "label": "Scalar initial profile",
        "section": "physics",
        "type": "choice",
        "options": ["sine", "linear", "quadratic"],
        "default": "sine"
    },
    # Scheme
    "dissipation": {
        "label": "Interface dissipation",
        "section": "scheme",
        "type": "bool",
        "default": True
    },
    "metric_target": {
        "label": "Volume metric targets",
        "section": "scheme",
        "type": "choice",
        "options": ["analytic", "thomas_lombard"],
        "default": "analytic"
    },
    "face_metrics": {
        "label": "Surface metric seeding",
        "section": "scheme",
        "type": "choice",
        "options": ["analytic", "thomas_lombard"],
        "default": "analytic"
    },
    "optimize_metrics": {
        "label": "Solve the metric optimization problem",
        "section": "scheme",
        "type": "bool",
        "default": True
    },
    "threads": {
        "label": "Worker threads (0 = all cores)",
        "section": "scheme",
        "type": "int",
        "range": (0, 4096),
        "default": 0
    },
    # Integrator
    "method": {
        "label": "Time integrator",
        "section": "integrator",
        "type": "choice",
        "options": ["dopri54", "rk4"],
        "default": "dopri54"
    },
    "t_end": {
        "label": "Final time",
        "section": "integrator",
        "type": "float",
        "range": (0.0, 1e6),
        "default": 1.0
    },
    "atol": {
        "label": "Absolute tolerance",
        "section": "integrator",
        "type": "float",
        "range": (1e-16, 1.0),
        "default": DEFAULT_TOLERANCE
    },
    "rtol": {
        "label": "Relative tolerance",
        "section": "integrator",
        "type": "float",
        "range": (1e-16, 1.0),
        "default": DEFAULT_TOLERANCE
    },
    "safety": {
        "label": "Step size safety factor",
        "section": "integrator",
        "type": "float",
        "range": (0.1, 1.0),
        "default": 0.9
    },
    "min_step": {
        "label": "Minimum step size",
        "section": "integrator",
        "type": "float",
        "range": (0.0, 1e6),
        "default": 1e-12
    },
    "max_step": {
        "label": "Maximum step size (0 = span)",
        "section": "integrator",
        "type": "float",
        "range": (0.0, 1e6),
        "default": 0.0
    },
    "dt": {
        "label": "Fixed step for rk4 (0 = automatic)",
        "section": "integrator",
        "type": "float",
        "range": (0.0, 1e6),
        "default": 0.0
    },
    "log_every": {
        "label": "Progress message stride (accepted steps)",
        "section": "integrator",
        "type": "int",
        "range": (1, 10**9),
        "default": 50
    },
    # Output
    "directory": {
        "label": "Output directory",
        "section": "output",
        "type": "str",
        "default": "results"
    },
    # Checks (null disables a check)
    "max_initial_residual": {
        "label": "Max |dq/dt| at t=0",
        "section": "checks",
        "type": "optional_float",
        "default": None
    },
    "max_entropy_rate": {
        "label": "Max relative |dS/dt| per accepted step",
        "section": "checks",
        "type": "optional_float",
        "default": None
    },
    "entropy_nonincreasing": {
        "label": "Max relative entropy increase per accepted step",
        "section": "checks",
        "type": "optional_float",
        "default": None
    },
    "max_conservation_drift": {
        "label": "Max relative drift of conserved totals",
        "section": "checks",
        "type": "optional_float",
        "default": None
    },
    "max_state_drift": {
        "label": "Max |q(t_end) - q(0)|",
        "section": "checks",
        "type": "optional_float",
        "default": None
    }
}

SECTIONS = ("run", "mesh", "physics", "scheme", "integrator", "output", "checks")

# Artifact file names written into the output directory
STEPS_FILENAME = "steps.csv"
TIMESERIES_FILENAME = "timeseries.csv"
NORMS_FILENAME = "norms.csv"
SUMMARY_FILENAME = "summary.json"
CONVERGENCE_FILENAME = "convergence.csv"
