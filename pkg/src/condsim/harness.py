"""Scenario loading, the per-step simulation loop, oracles and benchmarks.

Scenarios are JSON files validated against a strict schema (unknown keys are
rejected). A run performs, per step: assemble dynamics, detect contacts,
nodalize, augment, solve, integrate; per-step metrics land in CSV rows with
deterministic formatting so identical (scenario, seed, solver) runs produce
identical bytes.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import baselines as bl
from .contacts import (
    Geometry,
    NodeProxy,
    Plane,
    RigidPointSet,
    StabilizationParams,
    StaticSphere,
    augment_dynamics,
    detect_contacts,
    nodalize,
)
from .dynamics import (
    Body,
    ConstraintPotential,
    DampingPolicy,
    SystemState,
    assemble_step,
    integrate,
    kinetic_energy,
)
from .errors import (
    DivergenceError,
    ScenarioValidationError,
    UnsupportedRegimeError,
)
from .solver import SolverConfig, solve_vfpi

DEFAULT_DT = 0.01  # s
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_VEC4 = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["step_size", "duration"],
    "properties": {
        "name": {"type": "string"},
        "duration": {"type": "number", "exclusiveMinimum": 0},
        "step_size": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "gravity": _VEC3,
        "bodies": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["type", "mass"],
                "properties": {
                    "type": {"enum": ["particle", "rigid"]},
                    "mass": {"type": "number", "exclusiveMinimum": 0},
                    "position": _VEC3,
                    "velocity": _VEC3,
                    "orientation": _VEC4,
                    "angular_velocity": _VEC3,
                    "radius": {"type": "number", "minimum": 0},
                    "inertia": _VEC3,
                    "contact_points": {"type": "array", "items": _VEC3},
                    "contact_radius": {"type": "number", "minimum": 0},
                },
            },
        },
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nx", "ny", "nz", "spacing", "mass", "stiffness"],
            "properties": {
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "nz": {"type": "integer", "minimum": 1},
                "spacing": {"type": "number", "exclusiveMinimum": 0},
                "mass": {"type": "number", "exclusiveMinimum": 0},
                "stiffness": {"type": "number", "exclusiveMinimum": 0},
                "origin": _VEC3,
                "node_radius": {"type": "number", "minimum": 0},
                "diagonals": {"type": "boolean"},
                "position_jitter": {"type": "number", "minimum": 0},
            },
        },
        "springs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["i", "j", "stiffness"],
                "properties": {
                    "i": {"type": "integer", "minimum": 0},
                    "j": {"type": "integer", "minimum": 0},
                    "stiffness": {"type": "number", "exclusiveMinimum": 0},
                    "rest": {"type": "number"},
                },
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "planes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["point", "normal"],
                        "properties": {"point": _VEC3, "normal": _VEC3},
                    },
                },
                "spheres": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["center", "radius"],
                        "properties": {
                            "center": _VEC3,
                            "radius": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
                "margin": {"type": "number", "minimum": 0},
            },
        },
        "contact": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu": {"type": "number", "minimum": 0},
                "mu2": {"type": "number", "minimum": 0},
                "beta_err": {"type": "number", "minimum": 0},
                "e_rest": {"type": "number", "minimum": 0, "maximum": 1},
                "restitution_threshold": {"type": "number", "minimum": 0},
                "kv": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "damping": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variant"],
            "properties": {
                "variant": {"enum": ["constant", "geometric-projection"]},
                "value": {"type": "number", "minimum": 0},
            },
        },
        "forces": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["force"],
                "properties": {
                    "force": _VEC3,
                    "start": {"type": "number", "minimum": 0},
                    "end": {"type": "number", "minimum": 0},
                    "body": {"type": "integer", "minimum": 0},
                    "bodies": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "lattice": {"enum": ["all", "top", "bottom"]},
                    "per_node": {"type": "boolean"},
                },
            },
        },
    },
}


@dataclass
class Scenario:
    """Validated scenario description, still close to the JSON shape."""

    raw: dict
    path: str | None = None

    @property
    def step_size(self) -> float:
        return float(self.raw["step_size"])

    @property
    def duration(self) -> float:
        return float(self.raw["duration"])

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.step_size))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))


@dataclass
class MetricsRow:
    step: int
    dyn_ms: float
    solve_ms: float
    iters: int
    residual: float
    max_pen_m: float
    contacts: int
    ke_J: float
    diverged: bool = False
    # not part of the CSV contract, kept for in-process checks
    converged: bool = False
    consistency: float = float("nan")


@dataclass
class RunConfig:
    solver: str = "cond"  # "cond" | "pgs" | "apgd"
    operator: str = "strict"
    step_strategy: str = "frobenius"
    residual_tol: float = 1e-4
    max_iters: int = 500
    chebyshev: bool = False
    kv: float | None = None
    seed: int | None = None
    omega: float = 0.0
    record_positions: bool = False


@dataclass
class RunResult:
    rows: list
    state: SystemState
    bodies: list
    positions: list = field(default_factory=list)  # optional per-step q snapshots
    any_diverged: bool = False
    assembly_s: float = 0.0  # baseline Delassus assembly total


def validate_scenario(data: dict) -> None:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioValidationError(f"scenario invalid at {loc}: {exc.message}") from exc
    steps = data["duration"] / data["step_size"]
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ScenarioValidationError(
            "duration/step_size must be an integer step count, "
            f"got {steps!r} for duration={data['duration']} step_size={data['step_size']}"
        )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    validate_scenario(data)
    return Scenario(data, path)


@dataclass
class Scene:
    """Instantiated scenario: bodies, constraints, geometry and force schedule."""

    bodies: list
    state: SystemState
    geometry: Geometry
    constraints: list
    force_entries: list  # (start, end, vector, velocity-offset list)
    stab: StabilizationParams
    mu: float
    mu2: float | None
    k_v: float
    gravity: np.ndarray
    lattice_node_offsets: list = field(default_factory=list)


def _lattice_nodes(spec: dict, rng: np.random.Generator):
    nx, ny, nz = spec["nx"], spec["ny"], spec["nz"]
    h = spec["spacing"]
    origin = np.array(spec.get("origin", [0.0, 0.0, 0.0]), dtype=float)
    pts = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                pts.append(origin + h * np.array([i, j, k], dtype=float))
    pts = np.array(pts)
    jitter = spec.get("position_jitter", 0.0)
    if jitter > 0:
        pts[:, :2] += rng.uniform(-jitter, jitter, size=(pts.shape[0], 2))
    return pts


def _lattice_edges(nx: int, ny: int, nz: int, diagonals: bool):
    def idx(i, j, k):
        return (k * ny + j) * nx + i

    edges = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                a = idx(i, j, k)
                if i + 1 < nx:
                    edges.append((a, idx(i + 1, j, k)))
                if j + 1 < ny:
                    edges.append((a, idx(i, j + 1, k)))
                if k + 1 < nz:
                    edges.append((a, idx(i, j, k + 1)))
                if diagonals:
                    if i + 1 < nx and j + 1 < ny:
                        edges.append((a, idx(i + 1, j + 1, k)))
                        edges.append((idx(i + 1, j, k), idx(i, j + 1, k)))
                    if i + 1 < nx and k + 1 < nz:
                        edges.append((a, idx(i + 1, j, k + 1)))
                        edges.append((idx(i + 1, j, k), idx(i, j, k + 1)))
                    if j + 1 < ny and k + 1 < nz:
                        edges.append((a, idx(i, j + 1, k + 1)))
                        edges.append((idx(i, j + 1, k), idx(i, j, k + 1)))
    return edges


def build_scene(s: Scenario, cfg: RunConfig | None = None) -> Scene:
    cfg = cfg or RunConfig()
    data = s.raw
    seed = cfg.seed if cfg.seed is not None else s.seed
    rng = np.random.default_rng(seed)
    dt = s.step_size

    bodies, q_parts, v_parts = [], [], []
    geometry = Geometry()
    geo = data.get("geometry", {})
    for p in geo.get("planes", []):
        n = np.array(p["normal"], dtype=float)
        geometry.planes.append(Plane(np.array(p["point"], dtype=float), n / np.linalg.norm(n)))
    for sp in geo.get("spheres", []):
        geometry.spheres.append(StaticSphere(np.array(sp["center"], dtype=float), sp["radius"]))
    if "margin" in geo:
        geometry.margin = geo["margin"]

    damp_spec = data.get("damping", {"variant": "constant", "value": 0.0})
    damping = DampingPolicy(damp_spec["variant"], damp_spec.get("value", 0.0))

    q_off = v_off = 0
    body_specs = data.get("bodies", [])
    for bs in body_specs:
        if bs["type"] == "particle":
            body = Body("particle3", bs["mass"], q_off, v_off)
            q_parts.append(np.array(bs.get("position", [0, 0, 0]), dtype=float))
            v_parts.append(np.array(bs.get("velocity", [0, 0, 0]), dtype=float))
            if bs.get("radius", 0.0) > 0.0:
                geometry.node_proxies.append(NodeProxy(len(bodies), v_off, bs["radius"]))
        else:
            inertia = np.diag(np.array(bs.get("inertia", [1.0, 1.0, 1.0]), dtype=float))
            body = Body("rigid6", bs["mass"], q_off, v_off, inertia)
            quat = np.array(bs.get("orientation", [1, 0, 0, 0]), dtype=float)
            q_parts.append(np.array(bs.get("position", [0, 0, 0]), dtype=float))
            q_parts.append(quat / np.linalg.norm(quat))
            v_parts.append(np.array(bs.get("velocity", [0, 0, 0]), dtype=float))
            v_parts.append(np.array(bs.get("angular_velocity", [0, 0, 0]), dtype=float))
            pts = bs.get("contact_points", [])
            if pts:
                geometry.rigid_points.append(
                    RigidPointSet(len(bodies), np.array(pts, dtype=float), bs.get("contact_radius", 0.0))
                )
        bodies.append(body)
        q_off += body.q_dim
        v_off += body.v_dim

    constraints = []
    for sp in data.get("springs", []):
        bi, bj = bodies[sp["i"]], bodies[sp["j"]]
        rest = sp.get("rest")
        if rest is None:
            pi = np.concatenate(q_parts)[bi.q_offset : bi.q_offset + 3]
            pj = np.concatenate(q_parts)[bj.q_offset : bj.q_offset + 3]
            rest = float(np.linalg.norm(pi - pj))
        constraints.append(
            ConstraintPotential(
                "distance-spring", bi.q_offset, bj.q_offset, bi.v_offset, bj.v_offset,
                sp["stiffness"], rest, damping,
            )
        )

    lattice_offsets = []
    lat = data.get("lattice")
    if lat is not None:
        pts = _lattice_nodes(lat, rng)
        base = len(bodies)
        node_r = lat.get("node_radius", 0.45 * lat["spacing"])
        for p in pts:
            body = Body("particle3", lat["mass"], q_off, v_off)
            bodies.append(body)
            lattice_offsets.append(v_off)
            q_parts.append(p)
            v_parts.append(np.zeros(3))
            if node_r > 0:
                geometry.node_proxies.append(NodeProxy(len(bodies) - 1, v_off, node_r))
            q_off += 3
            v_off += 3
        q_now = np.concatenate(q_parts)
        for a, b_ in _lattice_edges(lat["nx"], lat["ny"], lat["nz"], lat.get("diagonals", True)):
            ba, bb = bodies[base + a], bodies[base + b_]
            rest = float(
                np.linalg.norm(q_now[ba.q_offset : ba.q_offset + 3] - q_now[bb.q_offset : bb.q_offset + 3])
            )
            constraints.append(
                ConstraintPotential(
                    "distance-spring", ba.q_offset, bb.q_offset, ba.v_offset, bb.v_offset,
                    lat["stiffness"], rest, damping,
                )
            )

    q = np.concatenate(q_parts) if q_parts else np.zeros(0)
    v = np.concatenate(v_parts) if v_parts else np.zeros(0)
    state = SystemState(q, v, 0, dt)

    contact = data.get("contact", {})
    mu = contact.get("mu", 0.5)
    mu2 = contact.get("mu2")
    k_v = cfg.kv if cfg.kv is not None else contact.get("kv")
    if k_v is None:
        masses = [b.mass for b in bodies] or [1.0]
        k_v = 1e5 * float(np.median(masses)) / dt
    stab = StabilizationParams(
        beta_err=contact.get("beta_err", 0.2),
        e_rest=contact.get("e_rest", 0.0),
        dt=dt,
        v_rest_threshold=contact.get("restitution_threshold", 0.01),
    )

    force_entries = []
    for f in data.get("forces", []):
        start = f.get("start", 0.0)
        end = f.get("end", s.duration)
        vec = np.array(f["force"], dtype=float)
        offsets = []
        if "body" in f:
            offsets.append(bodies[f["body"]].v_offset)
        for bi in f.get("bodies", []):
            offsets.append(bodies[bi].v_offset)
        sel = f.get("lattice")
        if sel is not None:
            if lat is None:
                raise ScenarioValidationError("forces: 'lattice' target without a lattice block")
            nx, ny, nz = lat["nx"], lat["ny"], lat["nz"]
            per_layer = nx * ny
            if sel == "all":
                offsets.extend(lattice_offsets)
            elif sel == "top":
                offsets.extend(lattice_offsets[-per_layer:])
            else:
                offsets.extend(lattice_offsets[:per_layer])
        if not offsets:
            raise ScenarioValidationError("forces entry targets no body")
        if not f.get("per_node", True):
            vec = vec / len(offsets)
        force_entries.append((start, end, vec, offsets))

    gravity = np.array(data.get("gravity", DEFAULT_GRAVITY), dtype=float)
    return Scene(bodies, state, geometry, constraints, force_entries, stab, mu, mu2, k_v, gravity, lattice_offsets)


def external_force(scene: Scene, t: float, n: int) -> np.ndarray:
    """Gravity plus the piecewise-constant schedule, at simulation time t."""
    f = np.zeros(n)
    for body in scene.bodies:
        f[body.v_offset : body.v_offset + 3] += body.mass * scene.gravity
    for start, end, vec, offsets in scene.force_entries:
        if start <= t < end:
            for off in offsets:
                f[off : off + 3] += vec
    return f


def _solver_cfg(cfg: RunConfig) -> SolverConfig:
    strategy = cfg.step_strategy
    if strategy == "bb-alt":
        strategy = "bb-alternating"
    return SolverConfig(
        operator=cfg.operator,
        step_strategy=strategy,
        residual_tol=cfg.residual_tol,
        max_iters=cfg.max_iters,
        chebyshev=cfg.chebyshev,
        omega=cfg.omega,
    )


def _warm_velocity(prev_vhat: np.ndarray | None, aug, n_orig: int) -> np.ndarray:
    """Previous-step representative velocity, extended to this step's virtual
    nodes through the rigid point map."""
    v0 = np.zeros(aug.n)
    if prev_vhat is None:
        return v0
    v0[:n_orig] = prev_vhat[:n_orig]
    nodal = aug.contacts
    if nodal is not None and nodal.n_virtual:
        v0[n_orig:] = nodal.jv @ v0[:n_orig]
    return v0


def _warm_impulses(contacts, prev_lam: dict) -> np.ndarray | None:
    if not prev_lam:
        return None
    lam = np.zeros(3 * len(contacts))
    for m, c in enumerate(contacts):
        got = prev_lam.get(c.key)
        if got is not None:
            lam[3 * m : 3 * m + 3] = got
    return lam


def run(s: Scenario, cfg: RunConfig | None = None) -> RunResult:
    """Simulate a scenario and collect per-step metrics."""
    cfg = cfg or RunConfig()
    scene = build_scene(s, cfg)
    state = scene.state
    bodies = scene.bodies
    n = state.v.shape[0]
    rows = []
    result = RunResult(rows, state, bodies)
    prev_vhat = None
    prev_lam: dict = {}

    for step in range(s.n_steps):
        t_sim = step * s.step_size
        t0 = time.perf_counter()
        f_ext = external_force(scene, t_sim, n)
        asm = assemble_step(state, bodies, scene.constraints, f_ext)
        raw = detect_contacts(state, bodies, scene.geometry)
        max_pen = max((rc.depth for rc in raw), default=0.0)
        nodal = nodalize(raw, state, bodies, scene.k_v, scene.mu, scene.mu2, scene.stab)
        aug = augment_dynamics(asm.a, asm.b, nodal)
        dyn_s = time.perf_counter() - t0

        t1 = time.perf_counter()
        diverged = False
        iters = 0
        residual = 0.0
        converged = False
        consistency = float("nan")
        if cfg.solver == "cond" or not nodal.contacts:
            try:
                v_hat_full, lam, rep = solve_vfpi(
                    aug, _solver_cfg(cfg), _warm_velocity(prev_vhat, aug, asm.n)
                )
                iters = rep.iterations
                residual = rep.residual_trace[-1] if rep.residual_trace else 0.0
                converged = rep.converged
                consistency = rep.consistency
            except DivergenceError:
                diverged = True
        else:
            try:
                prob = bl.assemble_delassus(aug)
                result.assembly_s += prob.assembly_s
                bcfg = bl.BaselineConfig(
                    residual_tol=cfg.residual_tol,
                    max_iters=cfg.max_iters,
                    warm_start=_warm_impulses(nodal.contacts, prev_lam),
                )
                solve = bl.solve_pgs if cfg.solver == "pgs" else bl.solve_apgd
                lam, brep = solve(prob, bcfg)
                v_hat_full = bl.recover_velocity(prob, lam.ravel())
                t1 += prob.assembly_s  # keep assembly out of solver time
                iters = brep.iterations
                residual = brep.residual_trace[-1] if brep.residual_trace else 0.0
                converged = brep.converged
                if not np.all(np.isfinite(v_hat_full)):
                    diverged = True
            except DivergenceError:
                diverged = True
        if diverged:
            # flagged zero-impulse fallback: take the contact-free step
            from scipy.sparse.linalg import cg

            v_hat_full, _ = cg(asm.a.as_scipy(), asm.b, rtol=1e-10, maxiter=10 * asm.n)
            v_hat_full = np.concatenate([v_hat_full, np.zeros(aug.n - asm.n)])
            lam = np.zeros((len(nodal.contacts), 3))
            result.any_diverged = True
        solve_s = time.perf_counter() - t1

        v_hat = v_hat_full[: asm.n]
        state = integrate(state, v_hat, bodies)
        prev_vhat = v_hat
        prev_lam = {c.key: lam[m] for m, c in enumerate(nodal.contacts)}
        rows.append(
            MetricsRow(
                step=step,
                dyn_ms=1e3 * dyn_s,
                solve_ms=1e3 * solve_s,
                iters=iters,
                residual=float(residual),
                max_pen_m=float(max_pen),
                contacts=len(nodal.contacts),
                ke_J=kinetic_energy(state, bodies),
                diverged=diverged,
                converged=converged,
                consistency=consistency,
            )
        )
        if cfg.record_positions:
            result.positions.append(state.q.copy())

    result.state = state
    return result


def analytic_box_slide(params: dict) -> np.ndarray:
    """Sliding-box oracle under constant tangential force.

    Returns the y positions at each step boundary, computed with the same
    midpoint discretization as the integrator so the comparison isolates
    contact error. Static friction holds the box when F_y <= mu m g.
    """
    m, mu, f_y, g = params["m"], params["mu"], params["F_y"], params.get("g", 9.81)
    t = params["t_k"]
    n = int(round(params["T"] / t))
    y0 = params.get("y0", 0.0)
    if params.get("F_z", 0.0) >= m * g:
        raise UnsupportedRegimeError("vertical force implies lift-off")
    ys = np.empty(n + 1)
    ys[0] = y0
    if f_y <= mu * m * g:
        ys[:] = y0
        return ys
    a = (f_y - mu * m * g) / m
    v = params.get("v0", 0.0)
    y = y0
    for k in range(n):
        v_hat = v + 0.5 * a * t
        y += t * v_hat
        v += a * t
        ys[k + 1] = y
    return ys


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


CSV_HEADER = "step,dyn_ms,solve_ms,iters,residual,max_pen_m,contacts,ke_J"


def report_csv(rows, path: str) -> None:
    """Write metrics rows with deterministic 17-significant-digit formatting."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(x)
                for x in (r.step, r.dyn_ms, r.solve_ms, r.iters, r.residual, r.max_pen_m, r.contacts, r.ke_J)
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_csv(path: str):
    """Round-trip reader for report_csv output."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ScenarioValidationError(f"unexpected CSV header {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append(
                MetricsRow(
                    step=int(parts[0]),
                    dyn_ms=float(parts[1]),
                    solve_ms=float(parts[2]),
                    iters=int(parts[3]),
                    residual=float(parts[4]),
                    max_pen_m=float(parts[5]),
                    contacts=int(parts[6]),
                    ke_J=float(parts[7]),
                )
            )
    return rows


def thread_budget() -> int:
    """Parallel width cap from COND_THREADS, defaulting to the hardware count."""
    raw = os.environ.get("COND_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ScenarioValidationError(f"COND_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


def scenario_with_size(s: Scenario, n_dof: int) -> Scenario:
    """Rescale the scenario's lattice footprint to roughly n_dof velocity DOF,
    keeping layer count and spacing."""
    data = json.loads(json.dumps(s.raw))
    lat = data.get("lattice")
    if lat is None:
        raise ScenarioValidationError("bench sizes require a lattice scenario")
    nz = lat["nz"]
    nodes = max(1, n_dof // 3)
    side = max(1, int(round(math.sqrt(nodes / nz))))
    lat["nx"] = side
    lat["ny"] = side
    return Scenario(data, s.path)


@dataclass
class BenchPoint:
    n: int
    mean_solve_s: float
    mean_dyn_s: float
    mean_iters: float


@dataclass
class BenchResult:
    points: list
    exponent: float | None = None
    r_squared: float | None = None


def bench_scaling(s: Scenario, sizes, cfg: RunConfig | None = None, steps_cap: int | None = None) -> BenchResult:
    """Run the scenario at several lattice sizes and fit log(time) vs log(n)."""
    cfg = cfg or RunConfig()
    points = []

    def one(size):
        sc = scenario_with_size(s, size)
        if steps_cap is not None:
            data = sc.raw
            data["duration"] = data["step_size"] * steps_cap
        res = run(sc, cfg)
        lat = sc.raw["lattice"]
        n = 3 * lat["nx"] * lat["ny"] * lat["nz"]
        rows = res.rows
        return BenchPoint(
            n,
            float(np.mean([r.solve_ms for r in rows])) / 1e3,
            float(np.mean([r.dyn_ms for r in rows])) / 1e3,
            float(np.mean([r.iters for r in rows])),
        )

    width = min(thread_budget(), len(list(sizes)))
    if width > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=width) as pool:
            points = list(pool.map(one, sizes))
    else:
        points = [one(size) for size in sizes]

    result = BenchResult(points)
    if len(points) >= 2:
        xs = np.log(np.array([p.n for p in points], dtype=float))
        ys = np.log(np.array([max(p.mean_solve_s, 1e-12) for p in points]))
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        result.exponent = float(slope)
        result.r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return result
