"""Velocity fixed-point contact solver with a diagonal surrogate system.

Each iteration takes a preconditioned residual step, solves every contact
independently against a scalar surrogate Delassus entry, and re-injects the
projected impulses:

    v* = v - W (A v - b)
    lambda_m = ProjectFC(-(gamma_m + omega_m)^-1 (eta_m + phi_m))
    v <- v* + W Jc^T lambda

The step matrix W is diagonal with the three entries of every contacted node
tied to a common value, which makes Jc W Jc^T block-diagonal with gamma*I
blocks, so the per-contact solves are exact one-shot projections. Optional
Chebyshev weighting accelerates the outer loop.

Impulse projection operators: "strict" (normal clamp then tangential disk
clamp, exact complementarity), "proximal" (Euclidean cone projection, convex
relaxation), "strict-anisotropic" (elliptic cone via minimum-distance
projection).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .contacts import AugmentedDynamics, apply_jc, apply_jc_t
from .errors import DivergenceError, InvalidMatrixError
from .sparse import SparseSymmetric, row_norms_sq, spmv

OPERATORS = ("strict", "proximal", "strict-anisotropic")
STEP_STRATEGIES = ("frobenius", "bb1", "bb2", "bb-alternating", "fixed-alpha")


@dataclass
class StepMatrix:
    """Diagonal surrogate step matrix with per-node tie groups."""

    w: np.ndarray  # (n,), all > 0
    tied_nodes: list = field(default_factory=list)  # column offsets of tied triples


@dataclass
class SurrogateDelassus:
    gamma: np.ndarray  # (n_c,), all > 0


@dataclass
class SolverConfig:
    operator: str = "strict"
    step_strategy: str = "frobenius"
    residual_tol: float = 1e-4
    max_iters: int = 500
    chebyshev: bool = False
    cheby_start: int = 10  # l_s
    under_relax: float = 0.9  # u
    omega: float = 0.0  # uniform contact regularization (invertible mode)
    fixed_alpha: float | None = None
    consistency_factor: float = 10.0  # force residual must reach this times tol
    w_recycle_period: int = 1  # steps between W recomputation (frobenius)


@dataclass
class SolverReport:
    iterations: int = 0
    residual_trace: list = field(default_factory=list)
    lam: np.ndarray | None = None
    converged: bool = False
    diverged: bool = False
    timings: dict = field(default_factory=dict)
    scc_residuals: np.ndarray | None = None
    consistency: float = float("nan")


def project_strict(lam_star: np.ndarray, mu: float) -> np.ndarray:
    """Normal clamp, then radial clamp of the tangential part."""
    lam = np.array(lam_star, dtype=float)
    lam[0] = max(lam[0], 0.0)
    limit = mu * lam[0]
    tn = float(np.linalg.norm(lam[1:]))
    if tn > limit:
        lam[1:] *= 0.0 if tn == 0.0 else limit / tn
    return lam


def project_proximal(lam_star: np.ndarray, mu: float) -> np.ndarray:
    """Euclidean projection onto the second-order friction cone."""
    lam = np.array(lam_star, dtype=float)
    tn = float(np.linalg.norm(lam[1:]))
    if tn <= mu * lam[0]:
        return lam  # inside
    if mu * tn <= -lam[0]:
        return np.zeros(3)  # polar cone
    ln = (lam[0] + mu * tn) / (1.0 + mu * mu)
    out = np.empty(3)
    out[0] = ln
    out[1:] = (mu * ln / tn) * lam[1:]
    return out


def _project_point_to_ellipse(p: np.ndarray, a: float, b: float, max_steps: int = 200) -> np.ndarray:
    """Closest point on the ellipse boundary (x/a)^2 + (y/b)^2 = 1, by
    bisection on the Lagrange multiplier of the projection problem."""
    x0, y0 = abs(p[0]), abs(p[1])
    # closest point satisfies x = a^2 x0/(a^2+t), y = b^2 y0/(b^2+t)
    def g(t):
        return (a * x0 / (a * a + t)) ** 2 + (b * y0 / (b * b + t)) ** 2 - 1.0

    lo = -min(a, b) ** 2 + 1e-300
    hi = max(a, b) * float(np.hypot(x0, y0)) + max(a, b) ** 2
    while g(hi) > 0:
        hi *= 2.0
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    t = 0.5 * (lo + hi)
    x = a * a * x0 / (a * a + t)
    y = b * b * y0 / (b * b + t)
    return np.array([np.copysign(x, p[0]), np.copysign(y, p[1])])


def project_strict_anisotropic(lam_star: np.ndarray, mu1: float, mu2: float) -> np.ndarray:
    """Normal clamp, then minimum-distance projection onto the friction ellipse."""
    lam = np.array(lam_star, dtype=float)
    if lam[0] <= 0.0:
        return np.zeros(3)
    a, b = mu1 * lam[0], mu2 * lam[0]
    x, y = lam[1], lam[2]
    if (x / a) ** 2 + (y / b) ** 2 <= 1.0:
        return lam
    if abs(x) < 1e-300 and abs(y) < 1e-300:
        return lam
    lam[1:] = _project_point_to_ellipse(lam[1:], a, b)
    return lam


def _project_batch(lam_star: np.ndarray, mu: np.ndarray, mu2, operator: str) -> np.ndarray:
    """Vectorized projection of (n_c, 3) trial impulses."""
    if operator == "strict":
        out = lam_star.copy()
        out[:, 0] = np.maximum(out[:, 0], 0.0)
        limit = mu * out[:, 0]
        tn = np.linalg.norm(out[:, 1:], axis=1)
        over = tn > limit
        scale = np.ones_like(tn)
        nz = over & (tn > 0)
        scale[nz] = limit[nz] / tn[nz]
        scale[over & (tn == 0)] = 0.0
        out[:, 1:] *= scale[:, None]
        return out
    if operator == "proximal":
        out = lam_star.copy()
        tn = np.linalg.norm(out[:, 1:], axis=1)
        inside = tn <= mu * out[:, 0]
        polar = mu * tn <= -out[:, 0]
        boundary = ~(inside | polar)
        ln = (out[:, 0] + mu * tn) / (1.0 + mu * mu)
        safe_tn = np.where(tn > 0, tn, 1.0)
        tang = (mu * ln / safe_tn)[:, None] * out[:, 1:]
        out[boundary, 0] = ln[boundary]
        out[boundary, 1:] = tang[boundary]
        out[polar] = 0.0
        return out
    if operator == "strict-anisotropic":
        mu2v = mu if mu2 is None else np.asarray(mu2, dtype=float)
        return np.array(
            [
                project_strict_anisotropic(lam_star[m], mu[m], mu2v[m])
                for m in range(lam_star.shape[0])
            ]
        )
    raise ValueError(f"unknown operator {operator!r}")


def _tie_groups(aug: AugmentedDynamics, pair_tie: bool):
    """Column-offset groups whose W entries must coincide.

    Every contacted node ties its own 3 entries; with ``pair_tie`` the two
    nodes of a D-contact additionally share one value (merged transitively).
    """
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    def union(x, y):
        parent.setdefault(x, x)
        parent.setdefault(y, y)
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    n_c = len(aug.contacts.contacts)
    for m in range(n_c):
        union(aug.col_i[m], aug.col_i[m])
        if aug.col_j[m] >= 0:
            union(aug.col_j[m], aug.col_j[m])
            if pair_tie:
                union(aug.col_i[m], aug.col_j[m])
    groups = {}
    for col in list(parent):
        groups.setdefault(find(col), []).append(col)
    return list(groups.values())


def step_matrix_frobenius(a: SparseSymmetric, aug: AugmentedDynamics | None = None, pair_tie: bool = False) -> StepMatrix:
    """W minimizing ||I - W A||_F under the diagonal + tie-group structure."""
    diag = a.diagonal()
    rns = row_norms_sq(a)
    if np.any(rns <= 0.0):
        raise InvalidMatrixError("zero row norm in step-matrix computation")
    w = diag / rns
    tied = []
    if aug is not None and aug.contacts is not None and aug.contacts.contacts:
        for group in _tie_groups(aug, pair_tie):
            idx = np.concatenate([np.arange(c, c + 3) for c in group])
            w[idx] = diag[idx].sum() / rns[idx].sum()
            tied.extend(group)
    return StepMatrix(w, tied)


def step_matrix_bb(s: np.ndarray, z: np.ndarray, variant: str, prev_alpha: float) -> float:
    """Barzilai-Borwein scalar step from the last displacement pair."""
    sz = float(s @ z)
    if sz <= 0.0:  # possible only from rounding with SPD A
        return prev_alpha
    if variant == "bb1":
        return float(s @ s) / sz
    if variant == "bb2":
        return sz / float(z @ z)
    raise ValueError(f"unknown BB variant {variant!r}")


def surrogate_gamma(w: StepMatrix, aug: AugmentedDynamics, omega: float = 0.0) -> SurrogateDelassus:
    """Per-contact scalar Delassus entries, by element extraction only."""
    wi = w.w[aug.col_i]
    _check_tie(w.w, aug.col_i)
    gamma = wi.copy()
    has_j = aug.col_j >= 0
    if has_j.any():
        _check_tie(w.w, aug.col_j[has_j])
        gamma[has_j] += w.w[aug.col_j[has_j]]
    return SurrogateDelassus(gamma + omega)


def _check_tie(w: np.ndarray, cols: np.ndarray) -> None:
    trip = w[cols[:, None] + np.arange(3)]
    if not (np.all(trip[:, 0] == trip[:, 1]) and np.all(trip[:, 0] == trip[:, 2])):
        raise InvalidMatrixError("step matrix violates the per-node tie groups")


def contact_solve_oneshot(
    gamma: SurrogateDelassus,
    eta: np.ndarray,
    phi: np.ndarray,
    mu: np.ndarray,
    operator: str = "strict",
    mu2=None,
    omega_included: bool = True,
    omega: float = 0.0,
) -> np.ndarray:
    """Independent per-contact solves of the diagonal surrogate problem.

    ``phi`` holds the per-contact normal stabilization terms; it only touches
    the normal component.
    """
    g = gamma.gamma if omega_included else gamma.gamma + omega
    phi_vec = np.zeros_like(eta)
    phi_vec[:, 0] = phi
    lam_star = -(eta + phi_vec) / g[:, None]
    return _project_batch(lam_star, mu, mu2, operator)


def chebyshev_nu(l: int, l_s: int, rho: float, nu_prev: float) -> float:
    """Three-branch Chebyshev weight schedule."""
    if l < l_s:
        return 1.0
    if l == l_s:
        return 2.0 / (2.0 - rho * rho)
    return 4.0 / (4.0 - rho * rho * nu_prev)


def chebyshev_update(v_ss: np.ndarray, v_prevprev: np.ndarray, nu: float) -> np.ndarray:
    return nu * (v_ss - v_prevprev) + v_prevprev


def estimate_rho(norm_l: float, norm_lm1: float, prev_rho: float = 0.0) -> float:
    """Spectral-radius proxy: clamped ratio of successive update norms."""
    if norm_lm1 <= 0.0:
        return prev_rho
    return min(norm_l / norm_lm1, 1.0)


def scc_residual(v_contact: np.ndarray, lam: np.ndarray, phi: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Per-contact violation of the complementarity contact conditions.

    ``v_contact`` is the (n_c, 3) contact-frame velocity, ``lam`` the
    contact-frame impulse. Zero means the normal complementarity, cone
    containment and slip alignment all hold.
    """
    v_contact = np.atleast_2d(v_contact)
    lam = np.atleast_2d(lam)
    phi = np.atleast_1d(phi)
    mu = np.atleast_1d(mu)
    ln = lam[:, 0]
    lt = lam[:, 1:]
    vn = v_contact[:, 0] + phi
    vt = v_contact[:, 1:]
    ltn = np.linalg.norm(lt, axis=1)
    res = np.abs(np.minimum(ln, 0.0))
    res = np.maximum(res, np.abs(np.minimum(vn, 0.0)))
    norm = np.maximum(1.0, np.maximum(np.abs(ln), np.abs(vn)))
    res = np.maximum(res, np.abs(ln * vn) / norm)
    res = np.maximum(res, np.maximum(0.0, ltn - mu * ln))
    # slip alignment: delta lt + mu ln vt = 0 with delta the slip multiplier
    vtn = np.linalg.norm(vt, axis=1)
    slip = vtn > 0
    delta = np.zeros_like(ln)
    safe_ltn = np.where(ltn > 0, ltn, 1.0)
    delta[slip] = (vtn * mu * ln / safe_ltn)[slip]
    align = np.linalg.norm(delta[:, None] * lt + (mu * ln)[:, None] * vt, axis=1)
    scale = np.maximum(1.0, (np.abs(mu * ln) * np.maximum(vtn, ltn)))
    res = np.maximum(res, align / scale)
    return res


def _contact_params(aug: AugmentedDynamics):
    cs = aug.contacts.contacts
    mu = np.array([c.mu for c in cs])
    mu2 = np.array([c.mu2 if c.mu2 is not None else c.mu for c in cs])
    phi = np.array([c.phi_n for c in cs])
    return mu, mu2, phi


def solve_vfpi(
    aug: AugmentedDynamics,
    cfg: SolverConfig,
    warm: np.ndarray,
    w_cached: StepMatrix | None = None,
    project_override=None,
):
    """Run the velocity fixed-point iteration on an augmented system.

    Returns (v_hat, lam, report). ``project_override`` replaces the impulse
    projection (used by test oracles); ``w_cached`` recycles a previously
    computed Frobenius step matrix.
    """
    a, b = aug.a, aug.b
    n = aug.n
    n_c = len(aug.contacts.contacts) if aug.contacts is not None else 0
    mu = mu2 = phi = None
    if n_c:
        mu, mu2, phi = _contact_params(aug)

    t0 = time.perf_counter()
    pair_tie = cfg.operator == "proximal"
    if cfg.step_strategy == "fixed-alpha":
        alpha = cfg.fixed_alpha if cfg.fixed_alpha is not None else 1.0 / np.abs(a.diagonal()).max()
        w = StepMatrix(np.full(n, alpha))
    elif w_cached is not None:
        w = w_cached
    else:
        w = step_matrix_frobenius(a, aug, pair_tie)
    gamma = surrogate_gamma(w, aug, cfg.omega) if n_c else None
    t_setup = time.perf_counter() - t0

    v = warm.astype(float).copy()
    v_prev = v.copy()
    lam = np.zeros((n_c, 3))
    report = SolverReport()
    alpha_prev = float(w.w.mean())
    rho = 0.0
    nu = 1.0
    norm_prev = 0.0
    t_loop0 = time.perf_counter()
    bb = cfg.step_strategy in ("bb1", "bb2", "bb-alternating")

    for l in range(1, cfg.max_iters + 1):
        if bb and l >= 2:
            s = v - v_prev
            z = spmv(a, s)
            if cfg.step_strategy == "bb-alternating":
                variant = "bb1" if l % 2 == 0 else "bb2"
            else:
                variant = cfg.step_strategy
            alpha = step_matrix_bb(s, z, variant, alpha_prev)
            alpha_prev = alpha
            w = StepMatrix(np.full(n, alpha))
            if n_c:
                gamma = surrogate_gamma(w, aug, cfg.omega)

        r = spmv(a, v) - b
        v_star = v - w.w * r
        if n_c:
            eta = apply_jc(aug, v_star)
            if project_override is None:
                lam = contact_solve_oneshot(gamma, eta, phi, mu, cfg.operator, mu2)
            else:
                lam_star = -(eta + phi[:, None] * _phi_mask()) / gamma.gamma[:, None]
                lam = project_override(lam_star, mu, mu2)
            v_new = v_star + w.w * apply_jc_t(aug, lam)
        else:
            v_new = v_star

        if cfg.chebyshev:
            v_ss = cfg.under_relax * v_new + (1.0 - cfg.under_relax) * v
            nu = chebyshev_nu(l, cfg.cheby_start, rho, nu)
            v_next = chebyshev_update(v_ss, v_prev, nu) if l > 1 else v_ss
        else:
            v_next = v_new

        theta = float(np.linalg.norm(v_next - v))
        report.residual_trace.append(theta)
        if not np.all(np.isfinite(v_next)):
            report.iterations = l
            report.diverged = True
            raise DivergenceError("non-finite iterate in V-FPI", report.residual_trace)

        if cfg.chebyshev:
            rho = estimate_rho(theta, norm_prev, rho)
        norm_prev = theta
        v_prev, v = v, v_next

        if theta < cfg.residual_tol:
            # the postcondition of convergence is dynamics consistency;
            # verify the force residual before declaring success
            force_res = float(
                np.linalg.norm(spmv(a, v) - b - (apply_jc_t(aug, lam) if n_c else 0.0))
            )
            report.consistency = force_res
            if force_res <= cfg.consistency_factor * cfg.residual_tol:
                report.converged = True
                report.iterations = l
                break
        if l == cfg.max_iters:
            report.iterations = l

    report.lam = lam
    report.timings = {
        "setup_s": t_setup,
        "loop_s": time.perf_counter() - t_loop0,
    }
    if n_c:
        eta_final = apply_jc(aug, v)
        report.scc_residuals = scc_residual(eta_final, lam, phi, mu)
        report.consistency = float(
            np.linalg.norm(spmv(a, v) - b - apply_jc_t(aug, lam))
        )
    else:
        report.consistency = float(np.linalg.norm(spmv(a, v) - b))
    return v, lam, report


def _phi_mask():
    return np.array([1.0, 0.0, 0.0])


def inverse_contact(aug: AugmentedDynamics, v_hat: np.ndarray, omega: float, operator: str = "proximal") -> np.ndarray:
    """Recover contact impulses from a converged velocity via the regularized
    (invertible) contact model: per contact, a one-shot solve with the
    regularization scalar in place of the surrogate Delassus entry."""
    mu, mu2, phi = _contact_params(aug)
    eta = apply_jc(aug, v_hat)
    lam_star = -(eta + phi[:, None] * _phi_mask()) / omega
    return _project_batch(lam_star, mu, mu2, operator)
