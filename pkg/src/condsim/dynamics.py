"""Per-step linearized implicit dynamics.

Builds the symmetric positive definite system ``A v_hat = b`` from point
masses, rigid bodies and quadratic constraint potentials, using the midpoint
velocity discretization: one implicit linear solve per step, with

    A = (2/t) M + (t/2) (Je^T K Je + E)
    b = (2/t) M v - C v - Je^T K e + f_ext

All right-hand-side terms are kept at force level (Newtons); contact impulses
later enter the same balance as forces. Gravity goes straight into f_ext and
its potential Hessian is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateConstraintError, InvalidStateError
from .sparse import SparseSymmetric

EPS_DAMPING_FLOOR = 1e-6  # N s/m, keeps E positive definite without visible damping


@dataclass
class Body:
    """One simulated body: a 3-DOF point mass or a 6-DOF rigid body.

    ``q_offset``/``v_offset`` locate the body inside the global coordinate and
    velocity vectors. Rigid bodies use 7 coordinates (position + unit
    quaternion, scalar first) but 6 velocity DOF (linear, then angular).
    """

    kind: str  # "particle3" | "rigid6"
    mass: float
    q_offset: int = 0
    v_offset: int = 0
    inertia: np.ndarray | None = None  # body-frame 3x3, rigid only

    @property
    def q_dim(self) -> int:
        return 3 if self.kind == "particle3" else 7

    @property
    def v_dim(self) -> int:
        return 3 if self.kind == "particle3" else 6


@dataclass
class SystemState:
    """Generalized coordinates and velocities for one scene."""

    q: np.ndarray
    v: np.ndarray
    step_index: int = 0
    dt: float = 0.01


@dataclass
class DampingPolicy:
    """Constant diagonal damping, or the diagonal surrogate of the geometric
    stiffness (absolute column sums), both floored at ``eps_floor``."""

    variant: str = "constant"  # "constant" | "geometric-projection"
    value: float = 0.0
    eps_floor: float = EPS_DAMPING_FLOOR


@dataclass
class ConstraintPotential:
    """Quadratic potential 0.5 e^T K e.

    kind "distance-spring": scalar e = |p_i - p_j| - rest, stiffness K in N/m.
    kind "tie": vector e = p_i - p_j, K = stiffness * I3.
    Offsets address the two participating 3-DOF nodes.
    """

    kind: str
    qi: int
    qj: int
    vi: int
    vj: int
    stiffness: float
    rest: float = 0.0
    damping: DampingPolicy = field(default_factory=DampingPolicy)

    @property
    def error_dim(self) -> int:
        return 1 if self.kind == "distance-spring" else 3


@dataclass
class AssembledDynamics:
    a: SparseSymmetric
    b: np.ndarray
    n: int


def constraint_eval(c: ConstraintPotential, q: np.ndarray):
    """Return (e, J_rows) with J_rows a dense (error_dim, 6) block over the
    stacked coordinates (node i, node j)."""
    pi = q[c.qi : c.qi + 3]
    pj = q[c.qj : c.qj + 3]
    if c.kind == "distance-spring":
        d = pi - pj
        dist = float(np.linalg.norm(d))
        if dist < 1e-12:
            raise DegenerateConstraintError("distance spring endpoints coincide")
        dhat = d / dist
        e = np.array([dist - c.rest])
        j = np.concatenate([dhat, -dhat]).reshape(1, 6)
        return e, j
    if c.kind == "tie":
        e = pi - pj
        j = np.hstack([np.eye(3), -np.eye(3)])
        return e, j
    raise ValueError(f"unknown constraint kind {c.kind!r}")


def _spring_error_hessian(c: ConstraintPotential, q: np.ndarray) -> np.ndarray:
    """6x6 Hessian of the scalar distance error."""
    pi = q[c.qi : c.qi + 3]
    pj = q[c.qj : c.qj + 3]
    d = pi - pj
    dist = float(np.linalg.norm(d))
    dhat = d / dist
    h = (np.eye(3) - np.outer(dhat, dhat)) / dist
    return np.block([[h, -h], [-h, h]])


def damping_matrix(policy: DampingPolicy, c: ConstraintPotential, q: np.ndarray) -> np.ndarray:
    """Diagonal damping contribution of one constraint over its 6 coordinates."""
    if policy.variant == "constant":
        return np.full(6, float(policy.value))
    if policy.variant == "geometric-projection":
        # diagonal abs-column-sum surrogate of the geometric stiffness
        # (d Je / dq)^T K e, plus the positive floor
        e, _ = constraint_eval(c, q)
        if c.kind == "distance-spring":
            g = c.stiffness * float(e[0]) * _spring_error_hessian(c, q)
        else:
            g = np.zeros((6, 6))  # tie error is linear in q
        return np.abs(g).sum(axis=0) + policy.eps_floor
    raise ValueError(f"unknown damping variant {policy.variant!r}")


def _quat_to_rot(quat: np.ndarray) -> np.ndarray:
    w, x, y, z = quat
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def world_inertia(body: Body, q: np.ndarray) -> np.ndarray:
    rot = _quat_to_rot(q[body.q_offset + 3 : body.q_offset + 7])
    return rot @ body.inertia @ rot.T


def mass_diag_blocks(bodies, q: np.ndarray):
    """Yield (v_offset, block) pairs for the block-diagonal mass matrix."""
    for body in bodies:
        if body.kind == "particle3":
            yield body.v_offset, body.mass * np.eye(3)
        else:
            yield body.v_offset, body.mass * np.eye(3)
            yield body.v_offset + 3, world_inertia(body, q)


def assemble_step(state: SystemState, bodies, constraints, f_ext: np.ndarray | None = None) -> AssembledDynamics:
    """Assemble A and b for one implicit step."""
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.v))):
        raise InvalidStateError("state contains non-finite values")
    n = state.v.shape[0]
    t = state.dt
    rows, cols, vals = [], [], []
    b = np.zeros(n)
    if f_ext is not None:
        b += f_ext

    for off, block in mass_diag_blocks(bodies, state.q):
        k = block.shape[0]
        ii, jj = np.meshgrid(range(off, off + k), range(off, off + k), indexing="ij")
        rows.append(ii.ravel())
        cols.append(jj.ravel())
        vals.append((2.0 / t) * block.ravel())
        b[off : off + k] += (2.0 / t) * block @ state.v[off : off + k]

    # gyroscopic term of C v for rigid bodies
    for body in bodies:
        if body.kind == "rigid6":
            omega = state.v[body.v_offset + 3 : body.v_offset + 6]
            iw = world_inertia(body, state.q)
            b[body.v_offset + 3 : body.v_offset + 6] -= np.cross(omega, iw @ omega)

    for c in constraints:
        e, j = constraint_eval(c, state.q)
        evals = damping_matrix(c.damping, c, state.q)
        block = 0.5 * t * (c.stiffness * j.T @ j + np.diag(evals))
        idx = np.concatenate([np.arange(c.vi, c.vi + 3), np.arange(c.vj, c.vj + 3)])
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        rows.append(ii.ravel())
        cols.append(jj.ravel())
        vals.append(block.ravel())
        force = c.stiffness * j.T @ e
        b[idx] -= force

    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    return AssembledDynamics(SparseSymmetric.from_scipy(a), b, n)


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    return np.concatenate(
        [[aw * bw - av @ bv], aw * bv + bw * av + np.cross(av, bv)]
    )


def _quat_exp(rotvec: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-12:
        return np.concatenate([[1.0], 0.5 * rotvec])
    axis = rotvec / angle
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def integrate(state: SystemState, v_hat: np.ndarray, bodies, dt: float | None = None) -> SystemState:
    """Advance the configuration by the representative velocity.

    Particles translate; rigid orientations update by the exponential map of
    the angular velocity. The stored next-step velocity is ``2 v_hat - v``.
    """
    t = state.dt if dt is None else dt
    q = state.q.copy()
    for body in bodies:
        if body.kind == "particle3":
            q[body.q_offset : body.q_offset + 3] += t * v_hat[body.v_offset : body.v_offset + 3]
        else:
            q[body.q_offset : body.q_offset + 3] += t * v_hat[body.v_offset : body.v_offset + 3]
            omega = v_hat[body.v_offset + 3 : body.v_offset + 6]
            dq = _quat_exp(t * omega)
            quat = _quat_mul(dq, q[body.q_offset + 3 : body.q_offset + 7])
            q[body.q_offset + 3 : body.q_offset + 7] = quat / np.linalg.norm(quat)
    v_next = 2.0 * v_hat - state.v
    return replace(state, q=q, v=v_next, step_index=state.step_index + 1)


def kinetic_energy(state: SystemState, bodies) -> float:
    """0.5 v^T M v in joules."""
    total = 0.0
    for off, block in mass_diag_blocks(bodies, state.q):
        k = block.shape[0]
        vseg = state.v[off : off + k]
        total += 0.5 * vseg @ block @ vseg
    return float(total)
