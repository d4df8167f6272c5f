"""Field-guided insertion: trajectory integration, stopping, and scoring.

The controller moves a point by the normalized field offset each iteration
and stops once the field intensity has decreased for ``stop_persistence``
consecutive steps, reporting the last position before the decrease run
(the sample closest to the flux maximum).  Success, quality, and delay are
scored against a nominal loop frame so that per-tick perturbations of the
live loop do not move the goal posts.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Union

import numpy as np

from .errors import IllConditionedError, KnotFieldError, NoInsertionError
from .field import FieldParams, flux_magnitude, offset, offset_planar
from .geometry import Loop, LoopFrame, fit_plane_frame, plane_crossing, point_inside_planar

STOP_BY_FIELD_DROP = "stopped-by-field-drop"
STOP_MAX_ITERS = "max-iters"
STOP_ERROR = "error"

LoopProvider = Callable[[int], Loop]


@dataclass(frozen=True)
class InsertionParams:
    """Control-loop configuration for a single insertion run."""

    field: FieldParams = dc_field(default_factory=FieldParams)
    max_iters: Optional[int] = None   # None: 10 * (start distance to loop) / gamma
    stop_persistence: int = 1         # consecutive flux decreases required to stop
    planar_mode: bool = False         # use the alpha/beta planar offset with a per-tick frame

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_persistence < 1:
            raise ValueError("stop_persistence must be >= 1")


@dataclass
class TrajectoryRecord:
    """Positions and flux samples per iteration, including the start."""

    positions: np.ndarray   # (n, 3)
    flux: np.ndarray        # (n,)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.flux = np.asarray(self.flux, dtype=float)
        if self.positions.shape[0] != self.flux.shape[0]:
            raise ValueError("positions and flux must have equal length")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass
class InsertionOutcome:
    success: bool
    quality: float            # meters; nan when the plane was never crossed
    delay: int                # iterations to first plane crossing; -1 if never
    stop_point: np.ndarray
    trajectory: TrajectoryRecord
    termination: str          # one of STOP_BY_FIELD_DROP / STOP_MAX_ITERS / STOP_ERROR
    error: Optional[str] = None


def step(x, loop: Loop, params: InsertionParams, frame: Optional[LoopFrame] = None) -> np.ndarray:
    """One controller update: x + offset(x)."""
    x = np.asarray(x, dtype=float)
    if params.planar_mode:
        if frame is None:
            frame = fit_plane_frame(loop)
        return x + offset_planar(loop, frame, x, params.field)
    return x + offset(loop, x, params.field)


def _default_max_iters(start: np.ndarray, loop: Loop, gamma: float) -> int:
    dist = float(np.linalg.norm(start - loop.centroid()))
    return max(1, int(np.ceil(10.0 * max(dist, gamma) / gamma)))


def run_insertion(start, loop_provider: Union[Loop, LoopProvider],
                  params: InsertionParams,
                  nominal_loop: Optional[Loop] = None) -> InsertionOutcome:
    """Integrate the guidance offset until the flux-drop stopping condition.

    ``loop_provider`` is either a static Loop or a callable(iteration) -> Loop
    evaluated fresh every tick, which is what makes the controller feedback:
    the offset always comes from the current (possibly deformed) loop.
    Scoring uses ``nominal_loop`` (default: the loop at iteration 0).
    """
    if isinstance(loop_provider, Loop):
        static = loop_provider
        provider: LoopProvider = lambda t: static
    else:
        provider = loop_provider

    x = np.asarray(start, dtype=float).copy()
    loop0 = provider(0)
    nominal = nominal_loop if nominal_loop is not None else loop0
    nominal_frame = fit_plane_frame(nominal)
    k = params.stop_persistence
    max_iters = params.max_iters
    if max_iters is None:
        max_iters = _default_max_iters(x, loop0, params.field.gamma)

    positions = [x.copy()]
    flux = []
    termination = STOP_MAX_ITERS
    error_msg = None
    decreases = 0
    stop_index = None

    try:
        loop = loop0
        frame = fit_plane_frame(loop) if params.planar_mode else None
        flux.append(flux_magnitude(loop, x, params.field))
        for it in range(1, max_iters + 1):
            x_prev = x
            x = step(x, loop, params, frame)
            positions.append(x.copy())
            loop = provider(it)
            if params.planar_mode:
                frame = fit_plane_frame(loop)
            f = flux_magnitude(loop, x, params.field)
            flux.append(f)
            # judge the move against a single loop snapshot so that loop
            # noise common to both endpoints cancels out of the comparison
            f_prev = flux_magnitude(loop, x_prev, params.field)
            if f < f_prev:
                decreases += 1
                if decreases >= k:
                    termination = STOP_BY_FIELD_DROP
                    stop_index = len(positions) - 1 - k
                    break
            else:
                decreases = 0
    except KnotFieldError as exc:
        termination = STOP_ERROR
        error_msg = str(exc)

    trajectory = TrajectoryRecord(np.array(positions), np.array(flux))
    if stop_index is None:
        stop_index = len(trajectory) - 1
    stop_point = trajectory.positions[stop_index]

    success = detect_success(trajectory, nominal, nominal_frame)
    try:
        quality = score_quality(trajectory, nominal, nominal_frame)
        delay = score_delay(trajectory, nominal_frame)
    except NoInsertionError:
        quality = float("nan")
        delay = -1
    return InsertionOutcome(
        success=success,
        quality=quality,
        delay=delay,
        stop_point=stop_point,
        trajectory=trajectory,
        termination=termination,
        error=error_msg,
    )


def _first_crossing(trajectory: TrajectoryRecord, frame: LoopFrame):
    """(iteration index, point, sign) of the first plane-crossing move."""
    pos = trajectory.positions
    heights = (pos - frame.centroid) @ frame.v_n
    for i in range(len(pos) - 1):
        d0, d1 = heights[i], heights[i + 1]
        if d0 == 0.0 and d1 == 0.0:
            continue
        if d0 * d1 > 0.0 or d0 == d1:
            continue
        crossing = plane_crossing(pos[i], pos[i + 1], frame)
        if crossing is not None:
            point, sign = crossing
            return i + 1, point, sign
    return None


def score_quality(trajectory: TrajectoryRecord, loop: Loop, frame: LoopFrame) -> float:
    """Distance from the first plane-crossing point to the loop centroid."""
    hit = _first_crossing(trajectory, frame)
    if hit is None:
        raise NoInsertionError("trajectory never crossed the loop plane")
    _, point, _ = hit
    return float(np.linalg.norm(point - frame.centroid))


def score_delay(trajectory: TrajectoryRecord, frame: LoopFrame) -> int:
    """Iteration index of the first move that crosses the loop plane."""
    hit = _first_crossing(trajectory, frame)
    if hit is None:
        raise NoInsertionError("trajectory never crossed the loop plane")
    return hit[0]


def detect_success(trajectory: TrajectoryRecord, loop: Loop, frame: LoopFrame) -> bool:
    """True iff the trajectory crosses the loop plane inside the loop,
    with the crossing sign matching the loop orientation (+v_n)."""
    hit = _first_crossing(trajectory, frame)
    if hit is None:
        return False
    _, point, sign = hit
    if sign != 1:
        return False
    return point_inside_planar(loop, frame, point)


def linking_number(curve_a: np.ndarray, curve_b: np.ndarray) -> int:
    """Gauss linking number of two disjoint closed polylines.

    Uses the exact solid-angle formula per segment pair, so the double sum
    lands on an integer up to floating error for any polygonal pair.
    Curves are (n, 3) vertex arrays, closed implicitly.
    """
    a = np.asarray(curve_a, dtype=float)
    b = np.asarray(curve_b, dtype=float)
    if _min_curve_distance(a, b) <= 1e-6:
        raise IllConditionedError("curves are too close for a reliable linking number")
    a_next = np.roll(a, -1, axis=0)
    total = 0.0
    for j in range(b.shape[0]):
        p0 = b[j]
        p1 = b[(j + 1) % b.shape[0]]
        ra = a - p0            # (n, 3)
        rb = a - p1
        rc = a_next - p1
        rd = a_next - p0
        na = np.linalg.norm(ra, axis=1)
        nb = np.linalg.norm(rb, axis=1)
        nc = np.linalg.norm(rc, axis=1)
        nd = np.linalg.norm(rd, axis=1)
        p = np.einsum("ij,ij->i", ra, np.cross(rb, rc))
        d1 = na * nb * nc + np.einsum("ij,ij->i", ra, rb) * nc \
            + np.einsum("ij,ij->i", rb, rc) * na + np.einsum("ij,ij->i", rc, ra) * nb
        d2 = na * nd * nc + np.einsum("ij,ij->i", ra, rd) * nc \
            + np.einsum("ij,ij->i", rd, rc) * na + np.einsum("ij,ij->i", rc, ra) * nd
        total += float(np.arctan2(p, d1).sum() + np.arctan2(p, d2).sum())
    value = total / (2.0 * np.pi)
    rounded = int(np.rint(value))
    if abs(value - rounded) >= 0.1:
        raise IllConditionedError(
            f"linking sum {value:.4f} is not close enough to an integer")
    return rounded


def _min_curve_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum distance between vertices of one curve and segments of the other."""
    return min(_points_to_segments(a, b), _points_to_segments(b, a))


def _points_to_segments(points: np.ndarray, curve: np.ndarray) -> float:
    v = curve
    d = np.roll(curve, -1, axis=0) - curve
    dd = np.einsum("ij,ij->i", d, d)
    rel = points[:, None, :] - v[None, :, :]          # (m, n, 3)
    t = np.einsum("mnj,nj->mn", rel, d) / dd[None, :]
    np.clip(t, 0.0, 1.0, out=t)
    closest = v[None, :, :] + t[..., None] * d[None, :, :]
    dist = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return float(dist.min())
