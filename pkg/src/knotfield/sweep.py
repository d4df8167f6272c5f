"""Seeded noise-robustness sweep over a perturbed planar loop.

Every trial integrates one insertion from a fixed start against a nominal
unit circle whose vertices are re-perturbed each tick, then scores
success, quality, and delay against the nominal frame.  Trial seeds are
derived from the master seed with counter-based spawn keys
(SeedSequence(master, spawn_key=(cell, trial))), so results are identical
no matter how trials are distributed over workers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field
from multiprocessing import Pool
from typing import Iterable, Optional

import numpy as np
from numba import njit

from .field import FieldParams
from .geometry import Loop, fit_plane_frame, make_circle
from .insertion import (STOP_BY_FIELD_DROP, STOP_ERROR, STOP_MAX_ITERS,
                        InsertionOutcome, InsertionParams, TrajectoryRecord,
                        detect_success, run_insertion, score_delay,
                        score_quality)
from .perturb import NoiseSpec, perturb

DEFAULT_SIGMAS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
DEFAULT_KINDS = ("isotropic", "cylindrical")
DEFAULT_COMBOS = ((1.0, 1.0), (2.0, 1.0), (1.0, 2.0))
WORKERS_ENV = "KNOTFIELD_WORKERS"


@dataclass(frozen=True)
class SweepConfig:
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    noise_kinds: tuple[str, ...] = DEFAULT_KINDS
    combos: tuple[tuple[float, float], ...] = DEFAULT_COMBOS
    trials: int = 1000
    gamma: float = 0.01
    # default start: 0.3 radii off the loop axis, 2 m from the plane, on
    # the approach side; an off-axis start keeps the in-plane field component
    # informative, so heavier in-plane weighting buys measurably better
    # centering instead of amplifying noise around an already-centered path
    start: tuple[float, float, float] = (0.3, 0.0, 2.0)
    master_seed: int = 0
    workers: int = 1
    loop_radius: float = 1.0
    loop_step: float = 0.1
    # large persistence: at 1000 trials/cell even rare spurious decrease
    # runs near the flux peak would show up as early stops
    stop_persistence: int = 8
    max_iters: int = 2000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigmas must be non-negative")

    def cells(self) -> list[tuple[str, float, float, float]]:
        return [(kind, sigma, alpha, beta)
                for kind in self.noise_kinds
                for sigma in self.sigmas
                for (alpha, beta) in self.combos]


@dataclass
class SweepRow:
    noise_kind: str
    sigma: float
    alpha: float
    beta: float
    trial: int
    seed: int
    success: bool
    quality: float
    delay: int
    termination: str


CSV_HEADER = "noise_kind,sigma,alpha,beta,trial,seed,success,quality,delay,termination"


def format_row(row: SweepRow) -> str:
    return (f"{row.noise_kind},{row.sigma:.10g},{row.alpha:.10g},{row.beta:.10g},"
            f"{row.trial},{row.seed},{int(row.success)},{row.quality:.10g},"
            f"{row.delay},{row.termination}")


def _nominal_loop(config: SweepConfig) -> Loop:
    # normal -Z so the guidance carries the default start at +z down through
    # the loop (the insertion side is chosen by the current direction)
    return make_circle(config.loop_radius, config.loop_step, normal=(0.0, 0.0, -1.0))


# trial kernel status codes
_RUNNING, _STOPPED, _SINGULAR, _DEGENERATE, _COLLINEAR = 0, 1, 2, 3, 4
_CHUNK = 256


@njit(cache=True)
def _field_at(verts, x):
    """Midpoint-rule field at x plus min distance to any segment."""
    n = verts.shape[0]
    bx = by = bz = 0.0
    min_d2 = 1e300
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        sx = verts[j, 0] - verts[i, 0]
        sy = verts[j, 1] - verts[i, 1]
        sz = verts[j, 2] - verts[i, 2]
        rx = x[0] - verts[i, 0] - 0.5 * sx
        ry = x[1] - verts[i, 1] - 0.5 * sy
        rz = x[2] - verts[i, 2] - 0.5 * sz
        r2 = rx * rx + ry * ry + rz * rz
        inv_r3 = r2 ** -1.5
        bx += (sy * rz - sz * ry) * inv_r3
        by += (sz * rx - sx * rz) * inv_r3
        bz += (sx * ry - sy * rx) * inv_r3
        # distance from x to this segment, for the singularity guard
        wx = x[0] - verts[i, 0]
        wy = x[1] - verts[i, 1]
        wz = x[2] - verts[i, 2]
        s2 = sx * sx + sy * sy + sz * sz
        t = (wx * sx + wy * sy + wz * sz) / s2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx = wx - t * sx
        dy = wy - t * sy
        dz = wz - t * sz
        d2 = dx * dx + dy * dy + dz * dz
        if d2 < min_d2:
            min_d2 = d2
    return bx, by, bz, np.sqrt(min_d2)


@njit(cache=True)
def _fit_frame(verts, carry):
    """Plane frame of verts into carry rows 0..3 (c, v_n, v_p1, v_p2)."""
    n = verts.shape[0]
    c0 = verts[:, 0].mean()
    c1 = verts[:, 1].mean()
    c2 = verts[:, 2].mean()
    cov = np.zeros((3, 3))
    for i in range(n):
        r0 = verts[i, 0] - c0
        r1 = verts[i, 1] - c1
        r2 = verts[i, 2] - c2
        cov[0, 0] += r0 * r0
        cov[0, 1] += r0 * r1
        cov[0, 2] += r0 * r2
        cov[1, 1] += r1 * r1
        cov[1, 2] += r1 * r2
        cov[2, 2] += r2 * r2
    cov[1, 0] = cov[0, 1]
    cov[2, 0] = cov[0, 2]
    cov[2, 1] = cov[1, 2]
    w, v = np.linalg.eigh(cov)
    hi = w[2] if w[2] > 1e-300 else 1e-300
    if w[1] <= 1e-12 * hi:
        return _COLLINEAR
    nx, ny, nz = v[0, 0], v[1, 0], v[2, 0]
    # orient the normal so the signed area about it is positive
    area2 = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        a0 = verts[i, 0] - c0
        a1 = verts[i, 1] - c1
        a2 = verts[i, 2] - c2
        b0 = verts[j, 0] - c0
        b1 = verts[j, 1] - c1
        b2 = verts[j, 2] - c2
        area2 += (a1 * b2 - a2 * b1) * nx + (a2 * b0 - a0 * b2) * ny \
            + (a0 * b1 - a1 * b0) * nz
    if abs(area2) < 1e-15:
        return _COLLINEAR
    if area2 < 0.0:
        nx, ny, nz = -nx, -ny, -nz
    p0 = verts[0, 0] - c0
    p1 = verts[0, 1] - c1
    p2 = verts[0, 2] - c2
    h = p0 * nx + p1 * ny + p2 * nz
    p0 -= h * nx
    p1 -= h * ny
    p2 -= h * nz
    pn = np.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
    if pn < 1e-12:
        return _COLLINEAR
    p0 /= pn
    p1 /= pn
    p2 /= pn
    carry[0, 0], carry[0, 1], carry[0, 2] = c0, c1, c2
    carry[1, 0], carry[1, 1], carry[1, 2] = nx, ny, nz
    carry[2, 0], carry[2, 1], carry[2, 2] = p0, p1, p2
    carry[3, 0] = ny * p2 - nz * p1
    carry[3, 1] = nz * p0 - nx * p2
    carry[3, 2] = nx * p1 - ny * p0
    return _RUNNING


@njit(cache=True)
def _trial_chunk(nominal, disp, carry, decreases, first,
                 gamma, alpha, beta, scale_c, k, out_pos, out_flux):
    """Advance up to disp.shape[0] provider ticks of one insertion trial.

    carry rows: 0..3 plane frame (centroid, v_n, v_p1, v_p2) of the current
    perturbed loop, 4 current position, 5 current field vector at it.
    Returns (ticks used, status, stop offset within this chunk, decreases).
    """
    n_ticks = disp.shape[0]
    verts = nominal + disp[0]
    for t in range(n_ticks):
        if first and t == 0:
            status = _fit_frame(verts, carry)
            if status != _RUNNING:
                return 1, status, -1, decreases
            bx, by, bz, min_d = _field_at(verts, carry[4])
            if min_d <= 1e-6:
                return 1, _SINGULAR, -1, decreases
            carry[5, 0] = scale_c * bx
            carry[5, 1] = scale_c * by
            carry[5, 2] = scale_c * bz
            out_pos[0] = carry[4]
            out_flux[0] = np.sqrt(carry[5, 0] ** 2 + carry[5, 1] ** 2
                                  + carry[5, 2] ** 2)
            continue
        # planar alpha/beta weighting of the current field in the current frame
        bp1 = carry[5, 0] * carry[2, 0] + carry[5, 1] * carry[2, 1] + carry[5, 2] * carry[2, 2]
        bp2 = carry[5, 0] * carry[3, 0] + carry[5, 1] * carry[3, 1] + carry[5, 2] * carry[3, 2]
        bn = carry[5, 0] * carry[1, 0] + carry[5, 1] * carry[1, 1] + carry[5, 2] * carry[1, 2]
        wx = alpha * (bp1 * carry[2, 0] + bp2 * carry[3, 0]) + beta * bn * carry[1, 0]
        wy = alpha * (bp1 * carry[2, 1] + bp2 * carry[3, 1]) + beta * bn * carry[1, 1]
        wz = alpha * (bp1 * carry[2, 2] + bp2 * carry[3, 2]) + beta * bn * carry[1, 2]
        wn = np.sqrt(wx * wx + wy * wy + wz * wz)
        if wn <= 1e-12:
            return t, _DEGENERATE, -1, decreases
        x_prev0, x_prev1, x_prev2 = carry[4, 0], carry[4, 1], carry[4, 2]
        carry[4, 0] += gamma * wx / wn
        carry[4, 1] += gamma * wy / wn
        carry[4, 2] += gamma * wz / wn
        # fresh loop snapshot; both flux samples use it so that loop noise
        # common to the two endpoints cancels out of the comparison
        verts = nominal + disp[t]
        status = _fit_frame(verts, carry)
        if status != _RUNNING:
            return t, status, -1, decreases
        bx, by, bz, min_d = _field_at(verts, carry[4])
        if min_d <= 1e-6:
            return t, _SINGULAR, -1, decreases
        carry[5, 0] = scale_c * bx
        carry[5, 1] = scale_c * by
        carry[5, 2] = scale_c * bz
        f = np.sqrt(carry[5, 0] ** 2 + carry[5, 1] ** 2 + carry[5, 2] ** 2)
        out_pos[t] = carry[4]
        out_flux[t] = f
        px = np.empty(3)
        px[0], px[1], px[2] = x_prev0, x_prev1, x_prev2
        pbx, pby, pbz, min_d = _field_at(verts, px)
        if min_d <= 1e-6:
            return t, _SINGULAR, -1, decreases
        f_prev = scale_c * np.sqrt(pbx * pbx + pby * pby + pbz * pbz)
        if f < f_prev:
            decreases += 1
            if decreases >= k:
                return t + 1, _STOPPED, t - k, decreases
        else:
            decreases = 0
    return n_ticks, _RUNNING, -1, decreases


def _noise_displacements(kind: str, sigma: float, rng: np.random.Generator,
                         n_verts: int, ticks: int,
                         radial: np.ndarray, v_n: np.ndarray) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros((ticks, n_verts, 3))
    if kind == "isotropic":
        return rng.normal(0.0, sigma, size=(ticks, n_verts, 3))
    # cylindrical: one radial draw per tick, applied to all vertices
    # coherently (same draw order as perturb() called tick by tick)
    g = rng.normal(0.0, sigma, size=ticks)
    return g[:, None, None] * radial[None]


def _fast_insertion(nominal: Loop, kind: str, sigma: float,
                    rng: np.random.Generator, params: InsertionParams,
                    start: np.ndarray) -> InsertionOutcome:
    """Kernel-backed equivalent of run_insertion for per-tick vertex noise."""
    frame = fit_plane_frame(nominal)
    rel = nominal.vertices - frame.centroid
    radial = rel - np.outer(rel @ frame.v_n, frame.v_n)
    radial /= np.linalg.norm(radial, axis=1)[:, None]
    fp = params.field
    k = params.stop_persistence
    max_iters = params.max_iters
    carry = np.zeros((6, 3))
    carry[4] = start
    positions = [np.array([start])]
    flux = []
    decreases = 0
    first = True
    done_ticks = 0
    status = _RUNNING
    stop_index = None
    while done_ticks <= max_iters and status == _RUNNING:
        ticks = min(_CHUNK, max_iters + 1 - done_ticks)
        disp = _noise_displacements(kind, sigma, rng, len(nominal.vertices),
                                    ticks, radial, frame.v_n)
        out_pos = np.empty((ticks, 3))
        out_flux = np.empty(ticks)
        used, status, stop_off, decreases = _trial_chunk(
            nominal.vertices, disp, carry, decreases, first,
            fp.gamma, fp.alpha, fp.beta, fp.scale_c, k, out_pos, out_flux)
        lo = 1 if first else 0
        positions.append(out_pos[lo:used])
        flux.append(out_flux[:used])
        if status == _STOPPED:
            stop_index = done_ticks + stop_off
        first = False
        done_ticks += used
    trajectory = TrajectoryRecord(np.vstack(positions), np.concatenate(flux))
    if stop_index is None:
        stop_index = len(trajectory) - 1
    termination = {_STOPPED: STOP_BY_FIELD_DROP, _RUNNING: STOP_MAX_ITERS}.get(
        status, STOP_ERROR)
    nominal_frame = fit_plane_frame(nominal)
    success = detect_success(trajectory, nominal, nominal_frame)
    try:
        quality = score_quality(trajectory, nominal, nominal_frame)
        delay = score_delay(trajectory, nominal_frame)
    except Exception:
        quality, delay = float("nan"), -1
    return InsertionOutcome(success=success, quality=quality, delay=delay,
                            stop_point=trajectory.positions[stop_index],
                            trajectory=trajectory, termination=termination,
                            error=None if termination != STOP_ERROR else "field error")


def run_trial(config: SweepConfig, cell_index: int, trial_index: int) -> SweepRow:
    kind, sigma, alpha, beta = config.cells()[cell_index]
    ss = np.random.SeedSequence(config.master_seed, spawn_key=(cell_index, trial_index))
    seed_id = int(ss.generate_state(1)[0])
    rng = np.random.default_rng(ss)
    nominal = _nominal_loop(config)
    k = 1 if sigma == 0.0 else config.stop_persistence
    params = InsertionParams(
        field=FieldParams(gamma=config.gamma, alpha=alpha, beta=beta),
        max_iters=config.max_iters,
        stop_persistence=k,
        planar_mode=True,
    )
    outcome = _fast_insertion(nominal, kind, sigma, rng, params,
                              np.array(config.start, dtype=float))
    return SweepRow(
        noise_kind=kind, sigma=sigma, alpha=alpha, beta=beta,
        trial=trial_index, seed=seed_id,
        success=outcome.success, quality=outcome.quality,
        delay=outcome.delay, termination=outcome.termination,
    )


def run_trial_reference(config: SweepConfig, cell_index: int,
                        trial_index: int) -> SweepRow:
    """Pure-numpy trial via run_insertion; slow cross-check for the kernel."""
    kind, sigma, alpha, beta = config.cells()[cell_index]
    ss = np.random.SeedSequence(config.master_seed, spawn_key=(cell_index, trial_index))
    seed_id = int(ss.generate_state(1)[0])
    rng = np.random.default_rng(ss)
    nominal = _nominal_loop(config)
    nominal_frame = fit_plane_frame(nominal)
    spec = NoiseSpec(kind=kind, sigma=sigma)
    if sigma == 0.0:
        provider = nominal
        k = 1
    else:
        provider = lambda t: perturb(nominal, spec, rng, frame=nominal_frame)
        k = config.stop_persistence
    params = InsertionParams(
        field=FieldParams(gamma=config.gamma, alpha=alpha, beta=beta),
        max_iters=config.max_iters,
        stop_persistence=k,
        planar_mode=True,
    )
    outcome = run_insertion(np.array(config.start, dtype=float), provider, params,
                            nominal_loop=nominal)
    return SweepRow(
        noise_kind=kind, sigma=sigma, alpha=alpha, beta=beta,
        trial=trial_index, seed=seed_id,
        success=outcome.success, quality=outcome.quality,
        delay=outcome.delay, termination=outcome.termination,
    )


def _run_task(args) -> tuple[int, int, SweepRow]:
    config, cell_index, trial_index = args
    try:
        row = run_trial(config, cell_index, trial_index)
    except Exception as exc:   # a broken trial is recorded, never aborts the sweep
        kind, sigma, alpha, beta = config.cells()[cell_index]
        row = SweepRow(noise_kind=kind, sigma=sigma, alpha=alpha, beta=beta,
                       trial=trial_index, seed=-1, success=False,
                       quality=float("nan"), delay=-1,
                       termination=f"error:{type(exc).__name__}")
    return cell_index, trial_index, row


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """All cells x trials, deterministically ordered by (cell, trial)."""
    tasks = [(config, c, t)
             for c in range(len(config.cells()))
             for t in range(config.trials)]
    if config.workers <= 1:
        results = [_run_task(task) for task in tasks]
    else:
        with Pool(processes=config.workers) as pool:
            results = pool.map(_run_task, tasks, chunksize=32)
    results.sort(key=lambda r: (r[0], r[1]))
    return [row for _, _, row in results]


@dataclass
class CellSummary:
    noise_kind: str
    sigma: float
    alpha: float
    beta: float
    trials: int
    failures: int
    mean_quality: float
    std_quality: float
    mean_delay: float
    std_delay: float


@dataclass
class SweepSummary:
    cells: list[CellSummary] = dc_field(default_factory=list)
    total_trials: int = 0
    total_failures: int = 0
    start: tuple[float, float, float] = (0.3, 0.0, 2.0)


def summarize(rows: Iterable[SweepRow], config: Optional[SweepConfig] = None) -> SweepSummary:
    groups: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.noise_kind, row.sigma, row.alpha, row.beta), []).append(row)
    summary = SweepSummary(start=config.start if config else (0.3, 0.0, 2.0))
    for key in sorted(groups):
        cell_rows = groups[key]
        q = np.array([r.quality for r in cell_rows], dtype=float)
        d = np.array([r.delay for r in cell_rows], dtype=float)
        ok = np.isfinite(q) & (d >= 0)
        failures = sum(1 for r in cell_rows if not r.success)
        summary.cells.append(CellSummary(
            noise_kind=key[0], sigma=key[1], alpha=key[2], beta=key[3],
            trials=len(cell_rows), failures=failures,
            mean_quality=float(q[ok].mean()) if ok.any() else float("nan"),
            std_quality=float(q[ok].std()) if ok.any() else float("nan"),
            mean_delay=float(d[ok].mean()) if ok.any() else float("nan"),
            std_delay=float(d[ok].std()) if ok.any() else float("nan"),
        ))
        summary.total_trials += len(cell_rows)
        summary.total_failures += failures
    return summary


def format_summary(summary: SweepSummary) -> str:
    lines = [
        f"# start position: {summary.start}",
        f"# total trials: {summary.total_trials}, total failures: {summary.total_failures}",
        "noise_kind,sigma,alpha,beta,trials,failures,mean_quality,std_quality,mean_delay,std_delay",
    ]
    for c in summary.cells:
        lines.append(
            f"{c.noise_kind},{c.sigma:.10g},{c.alpha:.10g},{c.beta:.10g},{c.trials},"
            f"{c.failures},{c.mean_quality:.10g},{c.std_quality:.10g},"
            f"{c.mean_delay:.10g},{c.std_delay:.10g}")
    return "\n".join(lines) + "\n"
