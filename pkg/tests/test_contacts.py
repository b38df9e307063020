"""Contact detection, nodalization and augmentation tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsim.contacts import (
    Geometry,
    NodeProxy,
    Plane,
    RigidPointSet,
    StabilizationParams,
    apply_jc,
    apply_jc_t,
    augment_dynamics,
    contact_frame,
    contact_jacobian_matrix,
    detect_contacts,
    nodalize,
    stabilization_term,
)
from condsim.dynamics import Body, SystemState
from condsim.errors import InvalidStateError
from condsim.sparse import SparseSymmetric
from condsim.testing import build_augmented, random_contact_set, random_spd

vec3 = st.tuples(
    st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False)
)


def particle_scene(positions, radius=0.5, dt=0.01):
    bodies = [Body("particle3", 1.0, 3 * i, 3 * i) for i in range(len(positions))]
    q = np.concatenate([np.asarray(p, dtype=float) for p in positions])
    state = SystemState(q, np.zeros(q.shape[0]), dt=dt)
    geom = Geometry(node_proxies=[NodeProxy(i, 3 * i, radius) for i in range(len(positions))])
    return state, bodies, geom


class TestContactFrame:
    def test_z_normal_example(self):
        r = contact_frame(np.array([0.0, 0.0, 1.0]))
        assert np.allclose(r, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])

    @settings(max_examples=200, deadline=None)
    @given(vec3)
    def test_orthonormal_right_handed(self, n):
        n = np.array(n)
        if np.linalg.norm(n) < 1e-3:
            return
        r = contact_frame(n)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(r), 1.0, atol=1e-12)
        assert np.allclose(r[0], n / np.linalg.norm(n), atol=1e-12)

    def test_deterministic_under_tiny_perturbation(self):
        a = contact_frame(np.array([1.0, 0.0, 0.0]))
        b = contact_frame(np.array([1.0 + 1e-12, 0.0, 0.0]) / np.linalg.norm([1.0 + 1e-12, 0.0, 0.0]))
        assert np.array_equal(a, b)

    def test_zero_normal_rejected(self):
        with pytest.raises(InvalidStateError):
            contact_frame(np.zeros(3))


class TestDetectContacts:
    def test_sphere_proxy_on_plane(self):
        state, bodies, geom = particle_scene([[0.0, 0.0, 0.4]], radius=0.5)
        geom.planes.append(Plane(np.zeros(3), np.array([0.0, 0.0, 1.0])))
        raw = detect_contacts(state, bodies, geom)
        assert len(raw) == 1
        assert np.isclose(raw[0].depth, 0.1)
        assert np.allclose(raw[0].point, [0.0, 0.0, -0.1])
        assert np.allclose(raw[0].normal, [0.0, 0.0, 1.0])

    def test_separated_particle_no_contact(self):
        state, bodies, geom = particle_scene([[0.0, 0.0, 1.0]], radius=0.0)
        geom.planes.append(Plane(np.zeros(3), np.array([0.0, 0.0, 1.0])))
        assert detect_contacts(state, bodies, geom) == []

    def test_dynamic_pair(self):
        state, bodies, geom = particle_scene([[0.0, 0.0, 0.0], [0.9, 0.0, 0.0]], radius=0.5)
        raw = detect_contacts(state, bodies, geom)
        assert len(raw) == 1
        rc = raw[0]
        assert rc.second[0] == "node"
        assert np.isclose(rc.depth, 0.1)
        assert np.allclose(np.abs(rc.normal), [1.0, 0.0, 0.0])


class TestStabilization:
    def test_penetration_compensation(self):
        p = StabilizationParams(beta_err=0.2, e_rest=0.0, dt=0.01)
        assert np.isclose(stabilization_term(0.01, 0.0, p), -0.2)

    def test_restitution_branch(self):
        p = StabilizationParams(beta_err=0.2, e_rest=0.5, dt=0.01, v_rest_threshold=0.01)
        assert np.isclose(stabilization_term(0.0, -1.0, p), -0.5)

    def test_resting_below_threshold(self):
        p = StabilizationParams(beta_err=0.2, e_rest=0.5, dt=0.01, v_rest_threshold=0.01)
        assert stabilization_term(0.0, -0.001, p) == 0.0


class TestNodalize:
    def test_particle_contact_stays_on_node(self):
        state, bodies, geom = particle_scene([[0.0, 0.0, 0.4]], radius=0.5)
        geom.planes.append(Plane(np.zeros(3), np.array([0.0, 0.0, 1.0])))
        raw = detect_contacts(state, bodies, geom)
        nodal = nodalize(raw, state, bodies, k_v=1e5)
        assert nodal.n_virtual == 0
        assert nodal.contacts[0].kind == "S"
        assert nodal.contacts[0].slot_i == ("orig", 0)

    def test_rigid_vertex_spawns_virtual_node(self):
        body = Body("rigid6", 0.5, 0, 0, np.diag([1.0, 1.0, 1.0]))
        q = np.concatenate([[0.0, 0.0, 0.1], [1.0, 0.0, 0.0, 0.0]])
        state = SystemState(q, np.zeros(6), dt=0.01)
        geom = Geometry(
            planes=[Plane(np.zeros(3), np.array([0.0, 0.0, 1.0]))],
            rigid_points=[RigidPointSet(0, np.array([[0.1, 0.1, -0.1]]))],
        )
        raw = detect_contacts(state, [body], geom)
        assert len(raw) == 1
        nodal = nodalize(raw, state, [body], k_v=1e5)
        assert nodal.n_virtual == 1
        assert nodal.contacts[0].slot_i == ("virt", 0)
        # Jv row is [I3, -[r]x] with r the world lever arm of the vertex
        jv = nodal.jv.toarray()
        lever = np.array([0.1, 0.1, -0.1])
        lx = np.array(
            [[0, -lever[2], lever[1]], [lever[2], 0, -lever[0]], [-lever[1], lever[0], 0]]
        )
        assert np.allclose(jv, np.hstack([np.eye(3), -lx]))

    def test_second_contact_on_same_node_moves_to_virtual(self):
        # particle wedged between two planes: diagonalization needs one
        # contact per node, so the second contact gets an identity-tied
        # virtual node
        state, bodies, geom = particle_scene([[0.0, 0.0, 0.4]], radius=0.5)
        geom.planes.append(Plane(np.zeros(3), np.array([0.0, 0.0, 1.0])))
        geom.planes.append(Plane(np.array([0.0, 0.0, 0.8]), np.array([0.0, 0.0, -1.0])))
        raw = detect_contacts(state, bodies, geom)
        assert len(raw) == 2
        nodal = nodalize(raw, state, bodies, k_v=1e5)
        slots = [c.slot_i for c in nodal.contacts]
        assert ("orig", 0) in slots
        assert ("virt", 0) in slots
        assert nodal.n_virtual == 1
        assert np.allclose(nodal.jv.toarray(), np.eye(3))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_at_most_one_contact_per_node(self, seed):
        g = np.random.default_rng(seed)
        _, contacts = random_contact_set(g)
        used = []
        for c in contacts:
            used.append(c.slot_i)
            if c.slot_j is not None:
                used.append(c.slot_j)
        assert len(used) == len(set(used))


class TestAugmentDynamics:
    def test_scalar_toy(self):
        # 1-D system, one virtual coordinate, k_v = 10: the augmented block
        # structure is [[A_o + k_v, -k_v], [-k_v, k_v]]
        import scipy.sparse as sp

        a_o = SparseSymmetric.from_dense(np.array([[1.0]]))
        jv = sp.csr_matrix(np.array([[1.0]]))
        kv = 10.0
        top = a_o.as_scipy() + kv * (jv.T @ jv)
        full = sp.bmat([[top, -kv * jv.T], [-kv * jv, kv * sp.identity(1)]]).toarray()
        assert np.allclose(full, [[11.0, -10.0], [-10.0, 10.0]])
        # characteristic polynomial x^2 - 21 x + 10 -> (21 +- sqrt(401)) / 2
        eigs = np.sort(np.linalg.eigvalsh(full))
        ref = np.sort([(21 - np.sqrt(401)) / 2, (21 + np.sqrt(401)) / 2])
        assert np.allclose(eigs, ref, atol=1e-12)
        assert eigs.min() > 0.0

    def test_no_virtual_nodes_identity(self, rng):
        a = random_spd(rng, 9)
        b = rng.standard_normal(9)
        n, contacts = 9, []
        aug = build_augmented(a, b, contacts)
        assert aug.n == n
        assert np.allclose(aug.a.to_dense(), a.to_dense())
        assert np.allclose(aug.b, b)

    def test_augmented_system_stays_spd(self, rng):
        body = Body("rigid6", 0.5, 0, 0, np.diag([1.0, 1.0, 1.0]))
        q = np.concatenate([[0.0, 0.0, 0.1], [1.0, 0.0, 0.0, 0.0]])
        state = SystemState(q, np.zeros(6), dt=0.01)
        geom = Geometry(
            planes=[Plane(np.zeros(3), np.array([0.0, 0.0, 1.0]))],
            rigid_points=[
                RigidPointSet(0, np.array([[0.1, 0.1, -0.1], [-0.1, 0.1, -0.1], [0.1, -0.1, -0.1]]))
            ],
        )
        raw = detect_contacts(state, [body], geom)
        nodal = nodalize(raw, state, [body], k_v=1e5)
        a_o = SparseSymmetric.from_dense(100.0 * np.eye(6) + rng.uniform(0, 1) * np.eye(6))
        aug = augment_dynamics(a_o, np.zeros(6), nodal)
        assert aug.b[6:].max() == 0.0 and aug.b[6:].min() == 0.0
        assert np.linalg.eigvalsh(aug.a.to_dense()).min() > 0.0

    def test_virtual_elimination_recovers_original_dynamics(self, rng):
        # solving the augmented system and eliminating the virtual block must
        # reproduce A_o v_o = b_o + Jv^T f_tie with the tie force equal to the
        # impulse routed through the virtual node (no spurious force injection)
        body = Body("rigid6", 0.5, 0, 0, np.diag([0.01, 0.01, 0.01]))
        q = np.concatenate([[0.0, 0.0, 0.1], [1.0, 0.0, 0.0, 0.0]])
        state = SystemState(q, np.zeros(6), dt=0.01)
        geom = Geometry(
            planes=[Plane(np.zeros(3), np.array([0.0, 0.0, 1.0]))],
            rigid_points=[RigidPointSet(0, np.array([[0.1, 0.1, -0.1], [-0.1, -0.1, -0.1]]))],
        )
        raw = detect_contacts(state, [body], geom)
        nodal = nodalize(raw, state, [body], k_v=1e4)
        a_dense = 50.0 * np.eye(6)
        b_o = rng.standard_normal(6)
        aug = augment_dynamics(SparseSymmetric.from_dense(a_dense), b_o, nodal)

        lam = rng.standard_normal((len(nodal.contacts), 3))
        rhs = aug.b + apply_jc_t(aug, lam)
        sol = np.linalg.solve(aug.a.to_dense(), rhs)
        v_o, v_v = sol[:6], sol[6:]
        jv = nodal.jv.toarray()
        tie_force = nodal.k_v * (v_v - jv @ v_o)  # viscous tie on the body
        residual = a_dense @ v_o - (b_o + jv.T @ tie_force)
        assert np.linalg.norm(residual) <= 1e-8 * max(1.0, np.linalg.norm(b_o))
        # the tie transmits exactly the contact impulse on each virtual node
        lam_world = np.einsum("mba,mb->ma", aug.frames, lam)
        assert np.allclose(tie_force, lam_world.ravel(), atol=1e-6)


class TestContactJacobian:
    def test_block_apply_matches_explicit_matrix(self, rng):
        for _ in range(10):
            n, contacts = random_contact_set(rng)
            a = random_spd(rng, n)
            aug = build_augmented(a, np.zeros(n), contacts)
            jc = contact_jacobian_matrix(aug)
            v = rng.standard_normal(n)
            assert np.allclose(apply_jc(aug, v).ravel(), jc @ v, atol=1e-12)
            lam = rng.standard_normal((len(contacts), 3))
            assert np.allclose(apply_jc_t(aug, lam), jc.T @ lam.ravel(), atol=1e-12)
