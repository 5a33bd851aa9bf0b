"""
Measured quantities of a run: volume-scaled error norms, entropy and
kinetic-energy rates, conserved totals and convergence rates.

All integrals use the element quadrature M J; per-element partial results
are combined in element order so reruns reproduce bit for bit.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from errors import ContractViolation

NORM_COLUMNS = ["grid", "L1", "L1 rate", "L2", "L2 rate", "Linf", "Linf rate"]


@dataclass
class NormReport:
    """Per-variable error norms; l2 is the squared volume-scaled quantity."""

    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    volume: float
    label: str = ""
    rates: Dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def l2_root(self):
        return np.sqrt(self.l2)

    def as_dict(self):
        return {"label": self.label, "volume": self.volume, "L1": self.l1.tolist(),
                "L2": self.l2.tolist(), "L2_root": self.l2_root.tolist(),
                "Linf": self.linf.tolist(), "rates": dict(self.rates)}


def domain_volume(disc):
    return float(np.sum([np.sum(s) for s in disc.scale]))


def error_norms(disc, state, exact, t=0.0, label=""):
    """
    Volume-scaled L1, squared L2 and Linf errors of state against exact(x, t).

    Args:
        disc: Discretization providing the quadrature M J and node coordinates.
        state: List of per-element conservative states.
        exact: Callable (x, t) -> q.
    """
    reference = disc.project(exact, t)
    if len(reference) != len(state):
        raise ContractViolation("state and mesh disagree on the number of elements")
    l1_parts, l2_parts, linf_parts = [], [], []
    for s, q, q_ref in zip(disc.scale, state, reference):
        if q.shape != q_ref.shape:
            raise ContractViolation(f"state of shape {q.shape}, exact solution {q_ref.shape}")
        e = q - q_ref
        flat_e = e.reshape(-1, e.shape[-1])
        flat_s = s.reshape(-1)[:, None]
        l1_parts.append(np.sum(flat_s * np.abs(flat_e), axis=0))
        l2_parts.append(np.sum(flat_s * flat_e ** 2, axis=0))
        linf_parts.append(np.max(np.abs(flat_e), axis=0))
    volume = domain_volume(disc)
    return NormReport(l1=np.sum(l1_parts, axis=0) / volume, l2=np.sum(l2_parts, axis=0) / volume,
                      linf=np.max(linf_parts, axis=0), volume=volume, label=label)


def entropy_rate(disc, state, dqdt):
    """sum over elements and nodes of w^T (M J dq/dt)."""
    parts = [np.sum(disc.physics.entropy_variables(q) * s[..., None] * rate)
             for s, q, rate in zip(disc.scale, state, dqdt)]
    return float(np.sum(parts))


def entropy_rate_by_faces(disc, state, t=0.0):
    """
    The entropy rate assembled from surface contributions only: the
    entropy potential against each element's metric forcing, plus w against
    every face coupling and dissipation term.

    Equals entropy_rate for the same state up to round-off.
    """
    physics = disc.physics
    parts = []
    for q, em in zip(state, disc.metrics):
        psi = physics.entropy_potential(q)
        parts.append(np.sum(psi * em.forcing))
    for fc in disc.couplings:
        q_owner, q_neighbor = disc.face_states(fc, state)
        w_owner = physics.entropy_variables(q_owner)
        if fc.face.boundary:
            parts.append(np.sum(w_owner * disc.boundary_coupling(fc, q_owner, t)))
            continue
        w_neighbor = physics.entropy_variables(q_neighbor)
        c_owner, c_neighbor = disc.coupling(fc, q_owner, q_neighbor)
        if disc.dissipation:
            d_owner, d_neighbor = disc.interface_dissipation(fc, q_owner, q_neighbor)
            c_owner, c_neighbor = c_owner + d_owner, c_neighbor + d_neighbor
        parts.append(np.sum(w_owner * c_owner) + np.sum(w_neighbor * c_neighbor))
    return float(np.sum(parts))


def kinetic_energy_rate(disc, state, dqdt):
    """
    d/dt of the integral of rho |u|^2 / 2, by the chain rule from dq/dt.
    Scalar physics use u^2 / 2.
    """
    parts = []
    for s, q, rate in zip(disc.scale, state, dqdt):
        if q.shape[-1] == 1:
            density = q[..., 0] * rate[..., 0]
        else:
            u = q[..., 1:4] / q[..., 0:1]
            density = (np.sum(u * rate[..., 1:4], axis=-1)
                       - 0.5 * np.sum(u * u, axis=-1) * rate[..., 0])
        parts.append(np.sum(s * density))
    return float(np.sum(parts))


def kinetic_energy(disc, state):
    parts = []
    for s, q in zip(disc.scale, state):
        if q.shape[-1] == 1:
            density = 0.5 * q[..., 0] ** 2
        else:
            density = 0.5 * np.sum(q[..., 1:4] ** 2, axis=-1) / q[..., 0]
        parts.append(np.sum(s * density))
    return float(np.sum(parts))


def conserved_totals(disc, state):
    """
    Returns:
        (per_element, total): per_element has shape (n_elements, nvar).
    """
    per_element = np.array([np.sum(s[..., None] * q, axis=(0, 1, 2)) for s, q in zip(disc.scale, state)])
    return per_element, np.sum(per_element, axis=0)


def total_entropy(disc, state):
    return float(np.sum([np.sum(s * disc.physics.entropy(q)) for s, q in zip(disc.scale, state)]))


def convergence_rates(grids, errors):
    """Observed orders log(e_k / e_{k-1}) / log(n_k / n_{k-1}); the first entry is None."""
    if len(grids) != len(errors):
        raise ContractViolation("one error per grid is required")
    rates: List[Optional[float]] = [None]
    for k in range(1, len(grids)):
        if errors[k] <= 0 or errors[k - 1] <= 0 or grids[k] == grids[k - 1]:
            rates.append(None)
            continue
        rates.append(math.log(errors[k] / errors[k - 1]) / math.log(grids[k] / grids[k - 1]))
    return rates


def norm_table_rows(grids, reports, variable=0):
    """
    Rows of the convergence table for one variable: grid, L1, rate, L2,
    rate, Linf, rate. Rates of the first grid are left empty.
    """
    columns = {}
    for name, getter in (("L1", lambda r: r.l1), ("L2", lambda r: r.l2), ("Linf", lambda r: r.linf)):
        values = [float(getter(r)[variable]) for r in reports]
        columns[name] = (values, convergence_rates(grids, values))
    rows = []
    for k, grid in enumerate(grids):
        row = [grid]
        for name in ("L1", "L2", "Linf"):
            values, rates = columns[name]
            row.extend([f"{values[k]:.6e}", "" if rates[k] is None else f"{rates[k]:.4f}"])
        rows.append(row)
    return rows
