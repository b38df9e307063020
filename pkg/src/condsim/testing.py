"""Shared random-scene generators for the self-verify command and the tests."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .contacts import AugmentedDynamics, Contact, NodalContactSet, contact_frame
from .solver import StepMatrix, step_matrix_frobenius
from .sparse import SparseSymmetric


def random_spd(rng: np.random.Generator, n: int, density: float = 0.3) -> SparseSymmetric:
    """Random sparse SPD matrix: B B^T + n I over a sprandn pattern."""
    b = sp.random(n, n, density=density, random_state=np.random.RandomState(int(rng.integers(2**31))))
    m = (b @ b.T) + n * sp.identity(n)
    return SparseSymmetric.from_scipy(m.tocsc())


def random_contact_set(rng: np.random.Generator, n_nodes: int | None = None, n_contacts: int | None = None):
    """Random nodalized contacts over particle nodes (no virtual nodes).

    Returns (n, contacts) with n the velocity dimension. Matching the
    nodalization output, every node carries at most one contact; D-contacts
    link two distinct nodes.
    """
    if n_nodes is None:
        n_nodes = int(rng.integers(4, 20))
    free = list(rng.permutation(n_nodes))
    if n_contacts is None:
        n_contacts = int(rng.integers(1, n_nodes))
    contacts = []
    while n_contacts > 0 and free:
        i = int(free.pop())
        frame = contact_frame(rng.standard_normal(3) + np.array([0.0, 0.0, 1e-3]))
        if rng.random() < 0.5 and len(free) >= 1:
            j = int(free.pop())
            contacts.append(
                Contact("D", ("orig", 3 * i), frame, float(rng.uniform(0.1, 1.0)), 0.0,
                        slot_j=("orig", 3 * j))
            )
        else:
            contacts.append(
                Contact("S", ("orig", 3 * i), frame, float(rng.uniform(0.1, 1.0)), 0.0)
            )
        n_contacts -= 1
    return 3 * n_nodes, contacts


def build_augmented(a: SparseSymmetric, b: np.ndarray, contacts) -> AugmentedDynamics:
    """Wrap an already-assembled system and particle-node contacts."""
    nodal = NodalContactSet(contacts, 0, None, 0.0)
    aug = AugmentedDynamics(a, b.copy(), a.dim, a.dim, nodal)
    n_c = len(contacts)
    aug.col_i = np.array([c.slot_i[1] for c in contacts], dtype=int)
    aug.col_j = np.array(
        [c.slot_j[1] if c.slot_j is not None else -1 for c in contacts], dtype=int
    )
    aug.frames = np.array([c.frame for c in contacts]) if n_c else np.zeros((0, 3, 3))
    return aug


def random_contact_augmentation(rng: np.random.Generator, pair_tie: bool = False):
    """Random SPD system plus contacts plus its tied Frobenius step matrix."""
    n, contacts = random_contact_set(rng)
    a = random_spd(rng, n)
    b = rng.standard_normal(n)
    aug = build_augmented(a, b, contacts)
    w = step_matrix_frobenius(a, aug, pair_tie)
    return aug, w
