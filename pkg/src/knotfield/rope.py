"""Kinematic rope: follow-the-leader updates, crossings, loop extraction.

The rope has no dynamics; it only preserves segment lengths while bound
points (grasped by grippers) are moved.  Regions with a single bound
boundary follow the leader outward from it; a span pinned at both ends is
relaxed by iterative length-constraint projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from numba import njit

from .errors import InvalidParameterError, NoLoopError, OverstretchError
from .geometry import Loop

LENGTH_TOL = 1e-6


@dataclass
class Rope:
    """Uniform-segment polyline; points (m, 3), ends R0 (first) and Rf (last)."""

    points: np.ndarray
    segment_length: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise InvalidParameterError("rope points must be an (m, 3) array")
        if self.points.shape[0] < 3:
            raise InvalidParameterError("rope needs at least 3 points")
        if self.segment_length <= 0:
            raise InvalidParameterError("segment_length must be positive")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def end_r0(self) -> int:
        return 0

    @property
    def end_rf(self) -> int:
        return len(self) - 1

    def total_length(self) -> float:
        return self.segment_length * (len(self) - 1)

    def max_length_violation(self) -> float:
        gaps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(np.abs(gaps - self.segment_length).max())


def make_straight_rope(start, end, n_points: int) -> Rope:
    """Evenly spaced rope from start to end."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    pts = start + np.linspace(0.0, 1.0, n_points)[:, None] * (end - start)
    seg = float(np.linalg.norm(end - start)) / (n_points - 1)
    return Rope(pts, seg)


@njit(cache=True)
def _ftl_outward(points: np.ndarray, seg: float, src: int, stop: int, direction: int) -> None:
    """Follow-the-leader from index ``src`` toward ``stop`` (exclusive)."""
    i = src
    while i + direction != stop:
        j = i + direction
        d0 = points[j, 0] - points[i, 0]
        d1 = points[j, 1] - points[i, 1]
        d2 = points[j, 2] - points[i, 2]
        dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if dist < 1e-12:
            # leader moved exactly onto the follower; keep the previous
            # direction of the chain if there is one, else pick +x
            k = j + direction
            if 0 <= k < points.shape[0]:
                d0 = points[k, 0] - points[j, 0]
                d1 = points[k, 1] - points[j, 1]
                d2 = points[k, 2] - points[j, 2]
                dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if dist < 1e-12:
                d0, d1, d2 = 1.0, 0.0, 0.0
                dist = 1.0
        f = seg / dist
        points[j, 0] = points[i, 0] + f * d0
        points[j, 1] = points[i, 1] + f * d1
        points[j, 2] = points[i, 2] + f * d2
        i = j


@njit(cache=True)
def _relax_span_jit(points: np.ndarray, seg: float, lo: int, hi: int,
                    max_iters: int, tol: float) -> None:
    for _ in range(max_iters):
        worst = 0.0
        for i in range(lo, hi):
            d0 = points[i + 1, 0] - points[i, 0]
            d1 = points[i + 1, 1] - points[i, 1]
            d2 = points[i + 1, 2] - points[i, 2]
            dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if dist < 1e-12:
                d0, d1, d2 = 1e-12, 0.0, 0.0
                dist = 1e-12
            err = dist - seg
            if abs(err) > worst:
                worst = abs(err)
            f = err / dist
            c0, c1, c2 = f * d0, f * d1, f * d2
            left_pinned = i == lo
            right_pinned = i + 1 == hi
            if left_pinned and right_pinned:
                continue
            if left_pinned:
                points[i + 1, 0] -= c0
                points[i + 1, 1] -= c1
                points[i + 1, 2] -= c2
            elif right_pinned:
                points[i, 0] += c0
                points[i, 1] += c1
                points[i, 2] += c2
            else:
                points[i, 0] += 0.5 * c0
                points[i, 1] += 0.5 * c1
                points[i, 2] += 0.5 * c2
                points[i + 1, 0] -= 0.5 * c0
                points[i + 1, 1] -= 0.5 * c1
                points[i + 1, 2] -= 0.5 * c2
        if worst < tol:
            break


def _relax_span(points: np.ndarray, seg: float, lo: int, hi: int,
                max_iters: int = 200) -> None:
    """Project segment-length constraints on points[lo..hi] with both ends pinned."""
    span = hi - lo
    chord = float(np.linalg.norm(points[hi] - points[lo]))
    if chord > span * seg * (1.0 + 1e-9):
        raise OverstretchError(
            f"bound points {lo} and {hi} demanded {chord:.4f} m apart "
            f"but only {span * seg:.4f} m of rope connects them")
    if span == 1:
        return
    _relax_span_jit(points, seg, lo, hi, max_iters, 0.25 * LENGTH_TOL)


def rope_update(rope: Rope, bindings: Mapping[int, np.ndarray]) -> Rope:
    """Move bound points to their targets and restore segment lengths.

    Unbound regions beyond the outermost bound points follow the leader;
    spans between two bound points are relaxed with both ends pinned.
    """
    if not bindings:
        return rope
    points = rope.points.copy()
    seg = rope.segment_length
    bound = sorted(bindings)
    for idx in bound:
        if not 0 <= idx < len(rope):
            raise InvalidParameterError(f"binding index {idx} out of range")
        points[idx] = np.asarray(bindings[idx], dtype=float)
    # tails beyond the outermost bound points follow the leader
    if bound[0] > 0:
        _ftl_outward(points, seg, bound[0], -1, -1)
    if bound[-1] < len(rope) - 1:
        _ftl_outward(points, seg, bound[-1], len(rope), +1)
    # spans between consecutive bound points
    for lo, hi in zip(bound, bound[1:]):
        if hi - lo >= 1:
            _relax_span(points, seg, lo, hi)
    return Rope(points, seg)


def project_points(points: np.ndarray, axis) -> np.ndarray:
    """Project 3D points onto the plane orthogonal to ``axis`` (2D coords)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(a)))] = 1.0
    e1 = np.cross(helper, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return np.stack([points @ e1, points @ e2], axis=-1)


def find_crossings(rope: Rope, axis) -> list[tuple[int, int, float, float]]:
    """Projected self-crossings of the rope along ``axis``.

    Returns (i, j, ti, tj) for each pair of non-adjacent segments whose 2D
    projections intersect, with the intersection parameters on each segment.
    Ordered by (i, j).
    """
    pts2 = project_points(rope.points, axis)
    p = pts2[:-1]
    r = pts2[1:] - pts2[:-1]
    n_seg = p.shape[0]
    ii, jj = np.triu_indices(n_seg, k=2)
    q = p[jj]
    s = r[jj]
    pi = p[ii]
    ri = r[ii]
    denom = ri[:, 0] * s[:, 1] - ri[:, 1] * s[:, 0]
    qp = q - pi
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
        u = (qp[:, 0] * ri[:, 1] - qp[:, 1] * ri[:, 0]) / denom
    ok = (np.abs(denom) > 1e-15) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
    out = [(int(a), int(b), float(ti), float(ui))
           for a, b, ti, ui in zip(ii[ok], jj[ok], t[ok], u[ok])]
    out.sort(key=lambda c: (c[0], c[1]))
    return out


def rope_loop_extraction(rope: Rope, axis, orient_for: Optional[np.ndarray] = None) -> Loop:
    """Extract the rope sub-polyline between the first projected crossing.

    The sub-polyline between the two crossing-adjacent points, closed by
    the implicit chord, becomes the target loop.  If ``orient_for`` is
    given, the loop is oriented so that the point lies on its -v_n side
    (field guidance then carries it through along +v_n).
    """
    crossings = find_crossings(rope, axis)
    if not crossings:
        raise NoLoopError("rope has no crossing in the projection")
    i, j, _, _ = crossings[0]
    verts = rope.points[i + 1:j + 1]
    if verts.shape[0] < 3:
        raise NoLoopError("projected crossing encloses too few rope points")
    loop = Loop(verts)
    if orient_for is not None:
        from .geometry import fit_plane_frame
        frame = fit_plane_frame(loop)
        if frame.height(orient_for) > 0:
            loop = loop.reversed()
    return loop
