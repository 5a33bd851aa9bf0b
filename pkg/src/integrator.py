"""
Explicit time integration: adaptive Dormand-Prince 5(4) with a digitally
filtered (H211b) step-size controller, and fixed-step classical RK4.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from constants import DEFAULT_TOLERANCE
from errors import ConfigError, IntegrationError, StateError

METHODS = ("dopri54", "rk4")

# Butcher rows of the Dormand-Prince pair; the last row is the 5th order solution (FSAL)
DOPRI_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
DOPRI_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
# difference between the 5th and embedded 4th order weights
DOPRI_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

MIN_ERROR = 1e-10
MAX_REJECT_SHRINK = 0.2


@dataclass
class IntegratorConfig:
    method: str = "dopri54"
    t_start: float = 0.0
    t_end: float = 1.0
    atol: float = DEFAULT_TOLERANCE
    rtol: float = DEFAULT_TOLERANCE
    safety: float = 0.9
    min_step: float = 1e-12
    max_step: float = 0.0
    dt: float = 0.0
    beta1: float = 1 / 20
    beta2: float = 1 / 20
    alpha: float = 1 / 4
    log_every: int = 50
    max_steps: int = 10_000_000

    @classmethod
    def from_config(cls, config):
        """Build from a resolved run configuration."""
        return cls(method=config["method"], t_end=config["t_end"], atol=config["atol"],
                   rtol=config["rtol"], safety=config["safety"], min_step=config["min_step"],
                   max_step=config["max_step"], dt=config["dt"], log_every=config["log_every"])

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown integrator '{self.method}', expected one of {METHODS}")
        if not (self.atol > 0 and self.rtol > 0):
            raise ConfigError("integrator tolerances must be positive")
        if not self.t_end > self.t_start:
            raise ConfigError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if not 0 < self.safety <= 1:
            raise ConfigError("safety factor must lie in (0, 1]")

    @property
    def span(self):
        return self.t_end - self.t_start


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    error: float
    accepted: bool
    observations: Dict[str, float] = field(default_factory=dict)


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    records: List[StepRecord]
    accepted: int
    rejected: int
    evaluations: int

    @property
    def accepted_records(self):
        return [r for r in self.records if r.accepted]


def write_steps_csv(records, path):
    """Stream step records as CSV: step, t, dt, error, accepted, then observer columns."""
    keys = []
    for record in records:
        for key in record.observations:
            if key not in keys:
                keys.append(key)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["step", "t", "dt", "error", "accepted"] + keys)
        for r in records:
            writer.writerow([r.step, f"{r.t:.17g}", f"{r.dt:.17g}", f"{r.error:.6e}", int(r.accepted)]
                            + [f"{r.observations[k]:.17g}" if k in r.observations else "" for k in keys])


def error_norm(error, y, y_new, atol, rtol):
    """Weighted RMS norm with per-component scale atol + rtol * max(|y|, |y_new|)."""
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


def _limiter(x):
    return 1.0 + math.atan(x - 1.0)


class _Stages:
    """Counts right-hand side evaluations and turns failures into IntegrationError."""

    def __init__(self, rhs, locate):
        self.rhs = rhs
        self.locate = locate
        self.count = 0

    def __call__(self, t, y, stage):
        self.count += 1
        try:
            k = np.asarray(self.rhs(t, y), dtype=float)
        except StateError as e:
            raise IntegrationError(f"non-physical state: {e}", time=t, stage=stage,
                                   element=e.element) from e
        bad = ~np.isfinite(k)
        if np.any(bad):
            index = int(np.argmax(bad))
            element = self.locate(index) if self.locate else None
            raise IntegrationError("non-finite stage derivative", time=t, stage=stage, element=element)
        return k


def initial_step(stages, t, y, f0, config):
    """Starting step from the size of y, f(y) and a finite-difference second derivative."""
    order = 5 if config.method == "dopri54" else 4
    scale = config.atol + config.rtol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, config.span)
    f1 = stages(t + h0, y + h0 * f0, 0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1, config.span)


def _observe(observers, t, y, dydt):
    values = {}
    for observer in observers:
        values.update(observer(t, y, dydt))
    return values


def integrate(rhs: Callable, y0, config: IntegratorConfig, observers=(), log_callback=print,
              locate: Optional[Callable] = None):
    """
    Advance y' = rhs(t, y) from config.t_start to config.t_end.

    Args:
        rhs: Right-hand side, (t, y) -> dy/dt.
        y0: Initial state vector.
        config: IntegratorConfig.
        observers: Callables (t, y, dydt) -> dict, invoked at the start and
            after every accepted step.
        log_callback: Progress messages every config.log_every accepted steps.
        locate: Maps a flat state index to an element number for diagnostics.

    Returns:
        IntegrationResult

    Raises:
        IntegrationError: step size underflow, step budget exhausted, or a
            stage produced a non-physical / non-finite state.
    """
    config.validate()
    stages = _Stages(rhs, locate)
    if config.method == "rk4":
        return _integrate_rk4(stages, np.array(y0, dtype=float), config, observers, log_callback)
    return _integrate_dopri(stages, np.array(y0, dtype=float), config, observers, log_callback)


def _integrate_dopri(stages, y, config, observers, log_callback):
    t = config.t_start
    max_step = config.max_step if config.max_step > 0 else config.span
    f = stages(t, y, 1)
    records = [StepRecord(0, t, 0.0, 0.0, True, _observe(observers, t, y, f))]
    h = min(initial_step(stages, t, y, f, config), max_step)
    h_prev, err_prev = None, None
    accepted = rejected = 0

    while t < config.t_end:
        if accepted + rejected >= config.max_steps:
            raise IntegrationError(f"step budget of {config.max_steps} exhausted", time=t)
        if h < config.min_step:
            raise IntegrationError(f"step size {h:.3e} below minimum {config.min_step:.3e}", time=t)
        if config.t_end - t < h:
            h = config.t_end - t
        k = [f]
        for i, row in enumerate(DOPRI_A):
            y_stage = y + h * sum(a * kj for a, kj in zip(row, k) if a != 0.0)
            k.append(stages(t + DOPRI_C[i + 1] * h, y_stage, i + 2))
        # the last stage is evaluated at the 5th order solution
        y_new = y_stage
        err = error_norm(h * sum(e * kj for e, kj in zip(DOPRI_E, k) if e != 0.0),
                         y, y_new, config.atol, config.rtol)

        if err <= 1.0:
            t_new = config.t_end if config.t_end - (t + h) <= 1e-14 * abs(config.t_end) else t + h
            accepted += 1
            err = max(err, MIN_ERROR)
            ratio = err ** -config.beta1
            if err_prev is not None:
                ratio *= err_prev ** -config.beta2 * (h / h_prev) ** -config.alpha
            records.append(StepRecord(accepted + rejected, t_new, h, err, True,
                                      _observe(observers, t_new, y_new, k[-1])))
            if accepted % max(1, config.log_every) == 0:
                log_callback(f"t={t_new:.6e} dt={h:.3e} accepted={accepted} rejected={rejected}")
            t, y, f = t_new, y_new, k[-1]
            h_prev, err_prev = h, err
            h = min(h * _limiter(config.safety * ratio), max_step)
        else:
            rejected += 1
            records.append(StepRecord(accepted + rejected, t, h, err, False))
            h *= max(MAX_REJECT_SHRINK, config.safety * err ** -0.2)

    return IntegrationResult(t=t, y=y, records=records, accepted=accepted, rejected=rejected,
                             evaluations=stages.count)


def _integrate_rk4(stages, y, config, observers, log_callback):
    t = config.t_start
    f = stages(t, y, 1)
    records = [StepRecord(0, t, 0.0, 0.0, True, _observe(observers, t, y, f))]
    dt = config.dt if config.dt > 0 else initial_step(stages, t, y, f, config)
    n_steps = max(1, int(math.ceil(config.span / dt - 1e-12)))
    dt = config.span / n_steps
    for step in range(1, n_steps + 1):
        if step > config.max_steps:
            raise IntegrationError(f"step budget of {config.max_steps} exhausted", time=t)
        k1 = f
        k2 = stages(t + 0.5 * dt, y + 0.5 * dt * k1, 2)
        k3 = stages(t + 0.5 * dt, y + 0.5 * dt * k2, 3)
        k4 = stages(t + dt, y + dt * k3, 4)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = config.t_start + step * dt
        f = stages(t, y, 1)
        records.append(StepRecord(step, t, dt, 0.0, True, _observe(observers, t, y, f)))
        if step % max(1, config.log_every) == 0:
            log_callback(f"t={t:.6e} dt={dt:.3e} steps={step}/{n_steps}")
    return IntegrationResult(t=t, y=y, records=records, accepted=n_steps, rejected=0,
                             evaluations=stages.count)
