"""Collision detection, contact nodalization and dynamics augmentation.

Contacts are detected against analytic primitives (half-spaces, static
spheres) and between dynamic sphere proxies. Every contact is then placed on a
3-DOF Cartesian node: lattice/particle contacts act on their own node, rigid
surface points spawn a one-step massless virtual node tied to the body by a
viscous gain ``k_v``. The augmented system keeps the block structure

    [ A_o + k_v Jv^T Jv   -k_v Jv^T ]
    [ -k_v Jv              k_v I    ]

which stays symmetric positive definite, and the contact Jacobian reduces to a
stack of rotation blocks over nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .dynamics import Body, SystemState, _quat_to_rot
from .errors import DimensionMismatchError, InvalidStateError
from .sparse import SparseSymmetric

DEFAULT_MARGIN = 1e-4  # m, contact activation distance


@dataclass
class Plane:
    point: np.ndarray
    normal: np.ndarray


@dataclass
class StaticSphere:
    center: np.ndarray
    radius: float


@dataclass
class NodeProxy:
    """Bounding sphere on an existing 3-DOF node."""

    body_index: int
    v_offset: int
    radius: float


@dataclass
class RigidPointSet:
    """Surface sample points of a rigid body, in body frame."""

    body_index: int
    local_points: np.ndarray  # (k, 3)
    radius: float = 0.0


@dataclass
class Geometry:
    planes: list = field(default_factory=list)
    spheres: list = field(default_factory=list)
    node_proxies: list = field(default_factory=list)
    rigid_points: list = field(default_factory=list)
    margin: float = DEFAULT_MARGIN


@dataclass
class RawContact:
    """Detector output before nodalization.

    ``first``/``second`` identify the provenance of each side:
    ("node", v_offset), ("rigid", body_index, point_index) or ("static",).
    The normal points from the second side toward the first.
    """

    point: np.ndarray
    normal: np.ndarray
    depth: float
    first: tuple
    second: tuple = ("static",)


@dataclass
class Contact:
    """One nodalized contact with its frame and parameters."""

    kind: str  # "S" | "D"
    slot_i: tuple  # ("orig", v_offset) or ("virt", index)
    frame: np.ndarray  # rows (n, t1, t2)
    mu: float
    depth: float
    phi_n: float = 0.0
    slot_j: tuple | None = None
    mu2: float | None = None
    warm_impulse: np.ndarray | None = None
    key: tuple | None = None  # provenance, for warm-start matching


@dataclass
class NodalContactSet:
    contacts: list
    n_virtual: int
    jv: sp.csr_matrix | None  # (3 n_v, n) map original velocity -> point velocity
    k_v: float


@dataclass
class StabilizationParams:
    beta_err: float = 0.2
    e_rest: float = 0.0
    dt: float = 0.01
    v_rest_threshold: float = 0.01


@dataclass
class AugmentedDynamics:
    a: SparseSymmetric
    b: np.ndarray
    n: int  # total (original + virtual) velocity dimension
    n_orig: int
    contacts: "NodalContactSet" = None
    # per contact: (column offset i, column offset j or -1)
    col_i: np.ndarray = None
    col_j: np.ndarray = None
    frames: np.ndarray = None  # (n_c, 3, 3)


def contact_frame(normal: np.ndarray) -> np.ndarray:
    """Orthonormal right-handed frame with rows (n, t1, t2).

    t1 is the projection of the global axis least aligned with n, which makes
    the frame deterministic under tiny normal perturbations.
    """
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise InvalidStateError("contact normal is zero")
    if abs(norm - 1.0) > 1e-9:
        n = n / norm
    axis = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[axis] = 1.0
    t1 = np.cross(np.cross(n, e), n)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.vstack([n, t1, t2])


def _world_rigid_points(state: SystemState, bodies, rp: RigidPointSet):
    body = bodies[rp.body_index]
    pos = state.q[body.q_offset : body.q_offset + 3]
    rot = _quat_to_rot(state.q[body.q_offset + 3 : body.q_offset + 7])
    return pos + rp.local_points @ rot.T


def detect_contacts(state: SystemState, bodies, geometry: Geometry) -> list:
    """One raw contact per (proxy, primitive) or (proxy, proxy) pair within margin."""
    margin = geometry.margin
    out = []

    # gather all dynamic proxy spheres: (position, radius, provenance)
    entries = []
    for p in geometry.node_proxies:
        body = bodies[p.body_index]
        pos = state.q[body.q_offset : body.q_offset + 3]
        entries.append((pos, p.radius, ("node", p.v_offset)))
    for rp in geometry.rigid_points:
        pts = _world_rigid_points(state, bodies, rp)
        for k, pt in enumerate(pts):
            entries.append((pt, rp.radius, ("rigid", rp.body_index, k)))

    for pos, r, prov in entries:
        for plane in geometry.planes:
            sd = float(np.dot(plane.normal, pos - plane.point)) - r
            if sd < margin:
                out.append(
                    RawContact(
                        point=pos - r * plane.normal,
                        normal=np.array(plane.normal, dtype=float),
                        depth=max(0.0, -sd),
                        first=prov,
                    )
                )
        for sphere in geometry.spheres:
            d = pos - sphere.center
            dist = float(np.linalg.norm(d))
            sd = dist - sphere.radius - r
            if sd < margin and dist > 1e-12:
                normal = d / dist
                out.append(
                    RawContact(
                        point=pos - r * normal,
                        normal=normal,
                        depth=max(0.0, -sd),
                        first=prov,
                    )
                )

    # dynamic-dynamic pairs via a KD-tree over proxy centers
    if len(entries) > 1:
        centers = np.array([e[0] for e in entries])
        radii = np.array([e[1] for e in entries])
        tree = cKDTree(centers)
        reach = 2.0 * radii.max() + margin
        for i, j in tree.query_pairs(r=reach):
            pi, ri, provi = entries[i]
            pj, rj, provj = entries[j]
            if provi[0] == "rigid" and provj[0] == "rigid" and provi[1] == provj[1]:
                continue  # same body
            d = pi - pj
            dist = float(np.linalg.norm(d))
            sd = dist - ri - rj
            if sd < margin and dist > 1e-12:
                normal = d / dist
                out.append(
                    RawContact(
                        point=pj + (rj + 0.5 * sd) * normal,
                        normal=normal,
                        depth=max(0.0, -sd),
                        first=provi,
                        second=provj,
                    )
                )
    return out


def stabilization_term(depth: float, v_n_prev: float, params: StabilizationParams) -> float:
    """Penetration compensation plus restitution, in m/s.

    The Signorini row later enforces ``v_n + phi_n >= 0``, so a negative value
    demands a separating velocity.
    """
    phi = -(params.beta_err / params.dt) * depth
    if abs(v_n_prev) > params.v_rest_threshold:
        phi += params.e_rest * min(0.0, v_n_prev)
    return phi


def _slot_and_jv(raw_side, state, bodies, point, jv_rows, next_virtual, used):
    """Resolve one contact side to a node slot, creating a virtual node if needed.

    Diagonalization requires every node to carry at most one contact, so a
    second contact landing on an already-contacted original node is moved onto
    a fresh virtual node tied to it by the identity map.
    """
    if raw_side[0] == "node":
        slot = ("orig", raw_side[1])
        if slot not in used:
            used.add(slot)
            return slot, next_virtual
        jv_rows.append((next_virtual, raw_side[1], np.eye(3)))
        return ("virt", next_virtual), next_virtual + 1
    if raw_side[0] == "rigid":
        body = bodies[raw_side[1]]
        lever = point - state.q[body.q_offset : body.q_offset + 3]
        lx = np.array(
            [
                [0.0, -lever[2], lever[1]],
                [lever[2], 0.0, -lever[0]],
                [-lever[1], lever[0], 0.0],
            ]
        )
        jv_rows.append((next_virtual, body.v_offset, np.hstack([np.eye(3), -lx])))
        return ("virt", next_virtual), next_virtual + 1
    raise ValueError(f"cannot nodalize side {raw_side!r}")


def nodalize(
    raw_contacts,
    state: SystemState,
    bodies,
    k_v: float,
    mu: float = 0.5,
    mu2: float | None = None,
    stab: StabilizationParams | None = None,
) -> NodalContactSet:
    """Place every raw contact on a 3-DOF node, spawning virtual nodes on
    rigid surface points. Virtual nodes live for this step only."""
    stab = stab or StabilizationParams(dt=state.dt)
    n = state.v.shape[0]
    contacts = []
    jv_rows = []
    n_virtual = 0
    used: set = set()
    for rc in raw_contacts:
        slot_i, n_virtual = _slot_and_jv(rc.first, state, bodies, rc.point, jv_rows, n_virtual, used)
        if rc.second[0] == "static":
            kind, slot_j = "S", None
        else:
            kind = "D"
            slot_j, n_virtual = _slot_and_jv(rc.second, state, bodies, rc.point, jv_rows, n_virtual, used)
        frame = contact_frame(rc.normal)
        v_n_prev = _normal_velocity(state, bodies, rc, frame)
        phi = stabilization_term(rc.depth, v_n_prev, stab)
        contacts.append(
            Contact(
                kind=kind,
                slot_i=slot_i,
                frame=frame,
                mu=mu,
                mu2=mu2,
                depth=rc.depth,
                phi_n=phi,
                slot_j=slot_j,
                key=(rc.first, rc.second),
            )
        )
    jv = None
    if n_virtual:
        rows, cols, vals = [], [], []
        for virt_idx, v_off, block in jv_rows:
            for r in range(3):
                for c in range(block.shape[1]):
                    rows.append(3 * virt_idx + r)
                    cols.append(v_off + c)
                    vals.append(block[r, c])
        jv = sp.csr_matrix((vals, (rows, cols)), shape=(3 * n_virtual, n))
    return NodalContactSet(contacts, n_virtual, jv, k_v)


def _side_velocity(state, bodies, side, point):
    if side[0] == "node":
        return state.v[side[1] : side[1] + 3]
    if side[0] == "rigid":
        body = bodies[side[1]]
        lever = point - state.q[body.q_offset : body.q_offset + 3]
        vlin = state.v[body.v_offset : body.v_offset + 3]
        omega = state.v[body.v_offset + 3 : body.v_offset + 6]
        return vlin + np.cross(omega, lever)
    return np.zeros(3)


def _normal_velocity(state, bodies, rc: RawContact, frame) -> float:
    v_rel = _side_velocity(state, bodies, rc.first, rc.point) - _side_velocity(
        state, bodies, rc.second, rc.point
    )
    return float(frame[0] @ v_rel)


def augment_dynamics(a_o: SparseSymmetric, b_o: np.ndarray, nodal: NodalContactSet) -> AugmentedDynamics:
    """Append virtual-node coordinates and the viscous tie blocks."""
    n_o = a_o.dim
    if b_o.shape[0] != n_o:
        raise DimensionMismatchError("augment_dynamics: b length mismatch")
    if nodal.n_virtual == 0:
        aug = AugmentedDynamics(a_o, b_o.copy(), n_o, n_o, nodal)
    else:
        kv = nodal.k_v
        jv = nodal.jv
        nv3 = 3 * nodal.n_virtual
        top_left = a_o.as_scipy() + kv * (jv.T @ jv)
        a = sp.bmat(
            [
                [top_left, -kv * jv.T],
                [-kv * jv, kv * sp.identity(nv3, format="csr")],
            ],
            format="csc",
        )
        b = np.concatenate([b_o, np.zeros(nv3)])
        aug = AugmentedDynamics(SparseSymmetric.from_scipy(a), b, n_o + nv3, n_o, nodal)

    n_c = len(nodal.contacts)
    col_i = np.zeros(n_c, dtype=int)
    col_j = np.full(n_c, -1, dtype=int)
    frames = np.zeros((n_c, 3, 3))
    for m, c in enumerate(nodal.contacts):
        col_i[m] = _slot_col(c.slot_i, n_o)
        if c.slot_j is not None:
            col_j[m] = _slot_col(c.slot_j, n_o)
        frames[m] = c.frame
    aug.col_i, aug.col_j, aug.frames = col_i, col_j, frames
    return aug


def _slot_col(slot, n_orig):
    if slot[0] == "orig":
        return slot[1]
    return n_orig + 3 * slot[1]


def contact_jacobian_matrix(aug: AugmentedDynamics) -> sp.csr_matrix:
    """Explicit sparse J_c, mostly for oracles and the baselines."""
    n_c = len(aug.contacts.contacts)
    rows, cols, vals = [], [], []
    for m in range(n_c):
        r = aug.frames[m]
        for a in range(3):
            for b in range(3):
                rows.append(3 * m + a)
                cols.append(aug.col_i[m] + b)
                vals.append(r[a, b])
                if aug.col_j[m] >= 0:
                    rows.append(3 * m + a)
                    cols.append(aug.col_j[m] + b)
                    vals.append(-r[a, b])
    return sp.csr_matrix((vals, (rows, cols)), shape=(3 * n_c, aug.n))


def apply_jc(aug: AugmentedDynamics, v: np.ndarray) -> np.ndarray:
    """J_c v as (n_c, 3) contact-frame velocities."""
    vi = v[aug.col_i[:, None] + np.arange(3)]
    rel = vi
    has_j = aug.col_j >= 0
    if has_j.any():
        rel = vi.copy()
        vj = v[np.where(has_j, aug.col_j, 0)[:, None] + np.arange(3)]
        rel[has_j] -= vj[has_j]
    return np.einsum("mab,mb->ma", aug.frames, rel)


def apply_jc_t(aug: AugmentedDynamics, lam: np.ndarray, n: int | None = None) -> np.ndarray:
    """J_c^T lam over the augmented coordinates."""
    n = aug.n if n is None else n
    out = np.zeros(n)
    world = np.einsum("mba,mb->ma", aug.frames, lam)
    np.add.at(out, aug.col_i[:, None] + np.arange(3), world)
    has_j = aug.col_j >= 0
    if has_j.any():
        np.subtract.at(out, aug.col_j[has_j][:, None] + np.arange(3), world[has_j])
    return out
