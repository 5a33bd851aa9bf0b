"""
Initial conditions and exact solutions of the test cases.

Every state function takes physical coordinates x of shape (..., 3) and a
time t and returns conservative variables of shape (..., nvar).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from constants import CASES
from errors import ConfigError
from physics import EulerPhysics, make_physics


def _wrap(delta, length):
    return np.mod(delta + 0.5 * length, length) - 0.5 * length


def isentropic_vortex(x, t, gamma=1.4, mach=0.5, strength=5.0, angle=45.0,
                      center=(0.0, 0.0, 0.0), bounds=None):
    """
    Two-dimensional isentropic vortex extruded along x3, convected with
    speed M (unit freestream sound speed) at `angle` degrees.

    With bounds given, the vortex centre wraps periodically.
    """
    alpha = np.radians(angle)
    speed = mach
    xc = center[0] + speed * np.cos(alpha) * t
    yc = center[1] + speed * np.sin(alpha) * t
    dx = x[..., 0] - xc
    dy = x[..., 1] - yc
    if bounds is not None:
        dx = _wrap(dx, bounds[0][1] - bounds[0][0])
        dy = _wrap(dy, bounds[1][1] - bounds[1][0])
    g = 1.0 - (dx * dx + dy * dy)
    swirl = strength * speed / (2.0 * np.pi) * np.exp(0.5 * g)
    temperature = 1.0 - strength ** 2 * mach ** 2 * (gamma - 1.0) / (8.0 * np.pi ** 2) * np.exp(g)
    rho = temperature ** (1.0 / (gamma - 1.0))
    p = rho * temperature / gamma
    u = np.stack([speed * np.cos(alpha) - swirl * dy,
                  speed * np.sin(alpha) + swirl * dx,
                  np.zeros_like(dx)], axis=-1)
    return _conservative(rho, u, p, gamma)


def taylor_green(x, t=0.0, gamma=1.4, mach=0.05, velocity=1.0, density=1.0, length=1.0):
    """Inviscid Taylor-Green vortex on [-pi L, pi L]^3 at constant temperature."""
    X, Y, Z = (x[..., m] / length for m in range(3))
    p0 = density * velocity ** 2 / (gamma * mach ** 2)
    p = p0 + density * velocity ** 2 / 16.0 * (np.cos(2 * X) + np.cos(2 * Y)) * (np.cos(2 * Z) + 2.0)
    rho = density * p / p0
    u = np.stack([velocity * np.sin(X) * np.cos(Y) * np.cos(Z),
                  -velocity * np.cos(X) * np.sin(Y) * np.cos(Z),
                  np.zeros_like(X)], axis=-1)
    return _conservative(rho, u, p, gamma)


def freestream(x, t=0.0, gamma=1.4, density=1.0, velocity=(1.0, 0.5, 0.25), pressure=1.0):
    shape = x.shape[:-1]
    rho = np.full(shape, float(density))
    u = np.broadcast_to(np.asarray(velocity, dtype=float), shape + (3,))
    return _conservative(rho, u, np.full(shape, float(pressure)), gamma)


def _conservative(rho, u, p, gamma):
    return EulerPhysics(gamma).conservative(rho, u, p)


def scalar_profile(x, profile, bounds):
    """Scalar initial data: periodic sine product, linear or quadratic polynomial."""
    if profile == "sine":
        phase = [2.0 * np.pi * (x[..., m] - bounds[m][0]) / (bounds[m][1] - bounds[m][0]) for m in range(3)]
        return (1.0 + 0.5 * np.sin(phase[0]) * np.sin(phase[1]) * np.sin(phase[2]))[..., None]
    if profile == "linear":
        return (x[..., 0] + x[..., 1] + x[..., 2])[..., None]
    if profile == "quadratic":
        return (x[..., 0] ** 2 + x[..., 1] * x[..., 2])[..., None]
    raise ConfigError(f"unknown scalar profile '{profile}'")


def convection_solution(x, t, velocity, profile, bounds):
    return scalar_profile(x - t * np.asarray(velocity, dtype=float), profile, bounds)


def burgers_linear_solution(x, t):
    """u = (x1 + x2 + x3) / (1 + 3t), exact for beta = (1, 1, 1)."""
    return ((x[..., 0] + x[..., 1] + x[..., 2]) / (1.0 + 3.0 * t))[..., None]


@dataclass(frozen=True)
class Case:
    name: str
    physics: object
    initial: Callable
    exact: Optional[Callable]


def make_case(config):
    """
    Build the physics object and state callables for a resolved configuration.

    Raises:
        ConfigError: the case has no exact solution but Dirichlet boundaries
            were requested, or the case name is unknown.
    """
    name = config["case"]
    if name not in CASES:
        raise ConfigError(f"unknown case '{name}', expected one of {CASES}")
    gamma = config["gamma"]
    bounds = config["bounds"]
    periodic = config["boundary"] == "periodic"
    physics = make_physics(name, gamma=gamma, velocity=config["velocity"])
    exact = None

    if name == "vortex":
        def exact(x, t):
            return isentropic_vortex(x, t, gamma=gamma, mach=config["mach"],
                                     strength=config["vortex_strength"], angle=config["angle"],
                                     center=config["center"], bounds=bounds if periodic else None)
        initial = exact
    elif name == "tgv":
        def initial(x, t=0.0):
            return taylor_green(x, t, gamma=gamma, mach=config["mach"],
                                velocity=config["reference_velocity"],
                                density=config["reference_density"], length=config["length_scale"])
    elif name == "freestream":
        def exact(x, t):
            return freestream(x, t, gamma=gamma, density=config["density"],
                              velocity=config["velocity"], pressure=config["pressure"])
        initial = exact
    elif name == "convection":
        def exact(x, t):
            return convection_solution(x, t, config["velocity"], config["profile"], bounds)
        initial = exact
    else:
        if config["profile"] == "linear":
            exact = burgers_linear_solution
            initial = exact
        else:
            def initial(x, t=0.0):
                return scalar_profile(x, config["profile"], bounds)

    if exact is None and not periodic:
        raise ConfigError(f"case '{name}' has no exact solution to supply Dirichlet boundary data; use periodic boundaries")
    if name == "convection" and periodic and config["profile"] != "sine":
        raise ConfigError("polynomial convection profiles need dirichlet boundaries")
    if name == "burgers" and periodic and config["profile"] != "sine":
        raise ConfigError("the linear Burgers solution needs dirichlet boundaries")
    return Case(name=name, physics=physics, initial=initial, exact=exact)
