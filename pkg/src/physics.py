"""
Flux definitions for the three governed systems: compressible Euler,
linear convection and Burgers.

All routines are vectorised over leading axes; the last axis holds the
conservative variables. Fluxes in the three Cartesian directions are
returned together with shape (..., 3, nvar).
"""

from dataclasses import dataclass

import numpy as np

from constants import DEFAULT_GAMMA
from errors import ContractViolation, StateError

LOG_MEAN_SERIES_THRESHOLD = 1e-4


def log_mean(a, b):
    """
    Logarithmic mean (b - a) / (ln b - ln a) of positive numbers.

    Uses a truncated series in f = (b - a)/(b + a) when |b/a - 1| < 1e-4.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ContractViolation("log_mean requires positive arguments")
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    f = (hi - lo) / (hi + lo)
    u = f * f
    series = (lo + hi) / (2.0 * (1.0 + u / 3.0 + u * u / 5.0 + u * u * u / 7.0))
    small = hi / lo - 1.0 < LOG_MEAN_SERIES_THRESHOLD
    with np.errstate(divide='ignore', invalid='ignore'):
        direct = (hi - lo) / np.log1p((hi - lo) / lo)
    result = np.where(small, series, direct)
    return result[()] if result.ndim == 0 else result


def _first_bad_node(mask):
    bad = np.argwhere(mask)
    return tuple(bad[0]) if len(bad) else None


@dataclass(frozen=True)
class EntropyPair:
    S: np.ndarray
    w: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class DissipationOperator:
    """Y |Lambda| Y^T and its factors at one or more face nodes."""

    matrix: np.ndarray
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray


class EulerPhysics:
    """Compressible Euler equations with the entropy S = -rho s / (gamma - 1)."""

    name = "euler"
    nvar = 5

    def __init__(self, gamma=DEFAULT_GAMMA):
        self.gamma = float(gamma)

    def primitive(self, q):
        rho = q[..., 0]
        u = q[..., 1:4] / rho[..., None]
        p = (self.gamma - 1.0) * (q[..., 4] - 0.5 * rho * np.sum(u * u, axis=-1))
        return rho, u, p

    def conservative(self, rho, u, p):
        rho = np.asarray(rho, dtype=float)
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        q = np.empty(np.broadcast(rho, p).shape + (5,))
        q[..., 0] = rho
        q[..., 1:4] = rho[..., None] * u
        q[..., 4] = p / (self.gamma - 1.0) + 0.5 * rho * np.sum(u * u, axis=-1)
        return q

    def check_state(self, q, element=None):
        """Raise StateError at the first node with rho <= 0, p <= 0 or non-finite data."""
        rho, _, p = self.primitive(q)
        bad = ~(rho > 0) | ~(p > 0) | ~np.all(np.isfinite(q), axis=-1)
        if np.any(bad):
            node = _first_bad_node(bad)
            raise StateError(f"non-physical state rho={rho[node]:.3e}, p={p[node]:.3e}",
                             element=element, node=node)

    def flux(self, q):
        rho, u, p = self.primitive(q)
        F = np.empty(q.shape[:-1] + (3, 5))
        F[..., 0] = q[..., 1:4]
        F[..., 1:4] = rho[..., None, None] * u[..., :, None] * u[..., None, :] + p[..., None, None] * np.eye(3)
        F[..., 4] = u * (q[..., 4] + p)[..., None]
        return F

    def two_point_flux(self, qL, qR):
        """Chandrashekar's entropy-conservative, kinetic-energy-preserving flux."""
        g = self.gamma
        rhoL, uL, pL = self.primitive(qL)
        rhoR, uR, pR = self.primitive(qR)
        betaL = 0.5 * rhoL / pL
        betaR = 0.5 * rhoR / pR
        rho_ln = log_mean(rhoL, rhoR)
        beta_ln = log_mean(betaL, betaR)
        u_avg = 0.5 * (uL + uR)
        p_hat = 0.5 * (rhoL + rhoR) / (betaL + betaR)
        u2_avg = 0.5 * (np.sum(uL * uL, axis=-1) + np.sum(uR * uR, axis=-1))

        mass = rho_ln[..., None] * u_avg
        F = np.empty(mass.shape + (5,))
        F[..., 0] = mass
        F[..., 1:4] = mass[..., :, None] * u_avg[..., None, :] + p_hat[..., None, None] * np.eye(3)
        F[..., 4] = (mass * (0.5 / ((g - 1.0) * beta_ln) - 0.5 * u2_avg)[..., None]
                     + np.einsum('...mk,...k->...m', F[..., 1:4], u_avg))
        return F

    def entropy(self, q):
        rho, _, p = self.primitive(q)
        s = np.log(p) - self.gamma * np.log(rho)
        return -rho * s / (self.gamma - 1.0)

    def entropy_variables(self, q):
        g = self.gamma
        rho, u, p = self.primitive(q)
        s = np.log(p) - g * np.log(rho)
        w = np.empty(q.shape)
        w[..., 0] = (g - s) / (g - 1.0) - 0.5 * rho * np.sum(u * u, axis=-1) / p
        w[..., 1:4] = (rho / p)[..., None] * u
        w[..., 4] = -rho / p
        return w

    def entropy_potential(self, q):
        """psi_m = rho u_m, shape (..., 3)."""
        return np.array(q[..., 1:4])

    def entropy_to_conservative(self, w, element=None):
        g = self.gamma
        w5 = w[..., 4]
        if np.any(~(w5 < 0)):
            raise StateError("entropy variables with w5 >= 0", element=element,
                             node=_first_bad_node(~(w5 < 0)))
        u = -w[..., 1:4] / w5[..., None]
        s = g - (g - 1.0) * (w[..., 0] - 0.5 * np.sum(w[..., 1:4] ** 2, axis=-1) / w5)
        rho = (-w5 * np.exp(s)) ** (1.0 / (1.0 - g))
        p = rho / (-w5)
        return self.conservative(rho, u, p)

    def dq_dw(self, q):
        """Symmetric Jacobian dq/dw, shape (..., 5, 5)."""
        rho, u, p = self.primitive(q)
        E = q[..., 4]
        H = (E + p) / rho
        c2 = self.gamma * p / rho
        A = np.empty(q.shape[:-1] + (5, 5))
        A[..., 0, 0] = rho
        A[..., 0, 1:4] = q[..., 1:4]
        A[..., 1:4, 0] = q[..., 1:4]
        A[..., 0, 4] = E
        A[..., 4, 0] = E
        A[..., 1:4, 1:4] = rho[..., None, None] * u[..., :, None] * u[..., None, :] + p[..., None, None] * np.eye(3)
        A[..., 1:4, 4] = (rho * H)[..., None] * u
        A[..., 4, 1:4] = A[..., 1:4, 4]
        A[..., 4, 4] = rho * H * H - c2 * p / (self.gamma - 1.0)
        return A

    def roe_average(self, qL, qR):
        """Square-root-density weighted (Roe) average state."""
        g = self.gamma
        rhoL, uL, pL = self.primitive(qL)
        rhoR, uR, pR = self.primitive(qR)
        sL, sR = np.sqrt(rhoL), np.sqrt(rhoR)
        HL = (qL[..., 4] + pL) / rhoL
        HR = (qR[..., 4] + pR) / rhoR
        u = (sL[..., None] * uL + sR[..., None] * uR) / (sL + sR)[..., None]
        H = (sL * HL + sR * HR) / (sL + sR)
        rho = sL * sR
        c2 = (g - 1.0) * (H - 0.5 * np.sum(u * u, axis=-1))
        if np.any(~(c2 > 0)):
            raise StateError("non-physical Roe-averaged state", node=_first_bad_node(~(c2 > 0)))
        return self.conservative(rho, u, rho * c2 / g)

    def eigensystem(self, q, normal):
        """
        Entropy-scaled right eigenvectors Y (columns) and eigenvalues of the
        flux Jacobian in the direction `normal` (magnitude included), with
        Y Y^T = dq/dw.
        """
        g = self.gamma
        normal = np.asarray(normal, dtype=float)
        magnitude = np.linalg.norm(normal, axis=-1)
        if np.any(~(magnitude > 0)):
            raise ContractViolation("dissipation needs a nonzero face metric vector")
        rho, u, p = self.primitive(q)
        n = normal / magnitude[..., None]
        n = np.broadcast_to(n, u.shape)
        c = np.sqrt(g * p / rho)
        un = np.sum(u * n, axis=-1)
        H = (q[..., 4] + p) / rho
        helper = np.eye(3)[np.argmin(np.abs(n), axis=-1)]
        t1 = np.cross(n, helper)
        t1 /= np.linalg.norm(t1, axis=-1)[..., None]
        t2 = np.cross(n, t1)

        Y = np.zeros(u.shape[:-1] + (5, 5))
        acoustic = np.sqrt(0.5 * rho / g)
        for col, sign in ((0, -1.0), (4, 1.0)):
            Y[..., 0, col] = acoustic
            Y[..., 1:4, col] = acoustic[..., None] * (u + sign * c[..., None] * n)
            Y[..., 4, col] = acoustic * (H + sign * c * un)
        entropy_wave = np.sqrt(rho * (g - 1.0) / g)
        Y[..., 0, 1] = entropy_wave
        Y[..., 1:4, 1] = entropy_wave[..., None] * u
        Y[..., 4, 1] = entropy_wave * 0.5 * np.sum(u * u, axis=-1)
        shear = np.sqrt(p)
        for col, t in ((2, t1), (3, t2)):
            Y[..., 1:4, col] = shear[..., None] * t
            Y[..., 4, col] = shear * np.sum(t * u, axis=-1)

        lam = np.empty(u.shape[:-1] + (5,))
        lam[..., 0] = un - c
        lam[..., 1:4] = un[..., None]
        lam[..., 4] = un + c
        return Y, magnitude[..., None] * lam

    def dissipation_matrix(self, qL, qR, normal):
        """Y |Lambda| Y^T at the Roe average of qL and qR, shape (..., 5, 5)."""
        Y, lam = self.eigensystem(self.roe_average(qL, qR), normal)
        return np.einsum('...ik,...k,...jk->...ij', Y, np.abs(lam), Y)


class ConvectionPhysics:
    """Linear convection u_t + div(a u) = 0 with constant velocity a."""

    name = "convection"
    nvar = 1

    def __init__(self, velocity=(1.0, 0.0, 0.0)):
        self.velocity = np.asarray(velocity, dtype=float)

    def check_state(self, q, element=None):
        bad = ~np.isfinite(q[..., 0])
        if np.any(bad):
            raise StateError("non-finite solution", element=element, node=_first_bad_node(bad))

    def flux(self, q):
        return self.velocity[:, None] * q[..., None, :]

    def two_point_flux(self, qL, qR):
        return self.velocity[:, None] * (0.5 * (qL + qR))[..., None, :]

    def entropy(self, q):
        return 0.5 * q[..., 0] ** 2

    def entropy_variables(self, q):
        return np.array(q)

    def entropy_potential(self, q):
        return 0.5 * self.velocity * q ** 2

    def entropy_to_conservative(self, w, element=None):
        return np.array(w)

    def dq_dw(self, q):
        return np.ones(q.shape[:-1] + (1, 1))

    def dissipation_matrix(self, qL, qR, normal):
        speed = np.abs(np.sum(np.asarray(normal) * self.velocity, axis=-1))
        return np.broadcast_to(speed, np.broadcast(qL[..., 0], qR[..., 0], speed).shape)[..., None, None]


class BurgersPhysics:
    """Inviscid Burgers u_t + sum_m d/dx_m (beta_m u^2 / 2) = 0."""

    name = "burgers"
    nvar = 1

    def __init__(self, direction=(1.0, 1.0, 1.0)):
        self.direction = np.asarray(direction, dtype=float)

    def check_state(self, q, element=None):
        bad = ~np.isfinite(q[..., 0])
        if np.any(bad):
            raise StateError("non-finite solution", element=element, node=_first_bad_node(bad))

    def flux(self, q):
        return self.direction[:, None] * (0.5 * q * q)[..., None, :]

    def two_point_flux(self, qL, qR):
        return self.direction[:, None] * ((qL * qL + qL * qR + qR * qR) / 6.0)[..., None, :]

    def entropy(self, q):
        return 0.5 * q[..., 0] ** 2

    def entropy_variables(self, q):
        return np.array(q)

    def entropy_potential(self, q):
        return self.direction * q ** 3 / 6.0

    def entropy_to_conservative(self, w, element=None):
        return np.array(w)

    def dq_dw(self, q):
        return np.ones(q.shape[:-1] + (1, 1))

    def dissipation_matrix(self, qL, qR, normal):
        speed = np.abs(np.sum(np.asarray(normal) * self.direction, axis=-1) * 0.5 * (qL[..., 0] + qR[..., 0]))
        return speed[..., None, None]


def make_physics(case, gamma=DEFAULT_GAMMA, velocity=(1.0, 0.0, 0.0)):
    """Physics object for a test case name."""
    if case == "convection":
        return ConvectionPhysics(velocity)
    if case == "burgers":
        return BurgersPhysics()
    return EulerPhysics(gamma)


# Single-direction helpers mirroring the textbook formulas


def euler_flux(q, m, gamma=DEFAULT_GAMMA):
    """Euler flux in Cartesian direction m (1, 2 or 3)."""
    physics = EulerPhysics(gamma)
    q = np.asarray(q, dtype=float)
    physics.check_state(q)
    return physics.flux(q)[..., m - 1, :]


def entropy_pair(q, gamma=DEFAULT_GAMMA):
    physics = EulerPhysics(gamma)
    q = np.asarray(q, dtype=float)
    physics.check_state(q)
    return EntropyPair(S=physics.entropy(q), w=physics.entropy_variables(q),
                       psi=physics.entropy_potential(q))


def ec_flux_euler(qL, qR, m, gamma=DEFAULT_GAMMA):
    physics = EulerPhysics(gamma)
    qL = np.asarray(qL, dtype=float)
    qR = np.asarray(qR, dtype=float)
    physics.check_state(qL)
    physics.check_state(qR)
    return physics.two_point_flux(qL, qR)[..., m - 1, :]


def dissipation_operator(qL, qR, face_metric, gamma=DEFAULT_GAMMA):
    physics = EulerPhysics(gamma)
    qL = np.asarray(qL, dtype=float)
    qR = np.asarray(qR, dtype=float)
    physics.check_state(qL)
    physics.check_state(qR)
    Y, lam = physics.eigensystem(physics.roe_average(qL, qR), face_metric)
    matrix = np.einsum('...ik,...k,...jk->...ij', Y, np.abs(lam), Y)
    return DissipationOperator(matrix=matrix, eigenvectors=Y, eigenvalues=lam)


def burgers_two_point(ui, uj):
    return (ui * ui + ui * uj + uj * uj) / 6.0


def convection_two_point(ui, uj, a_m):
    return a_m * 0.5 * (ui + uj)
