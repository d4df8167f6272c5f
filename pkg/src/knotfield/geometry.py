"""Closed 3D polyline loops: generators, plane frames, and planar predicates.

A loop is a closed oriented polyline; closure is implicit (the last vertex
connects back to the first, no duplicated end vertex) so field sums never
double-count a segment. Vertex order encodes the direction of the virtual
current.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Optional, TextIO, Union

import numpy as np

from .errors import DegenerateGeometryError, InvalidParameterError

MIN_VERTEX_SEPARATION = 1e-9


def _as_points(a) -> np.ndarray:
    pts = np.asarray(a, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidParameterError(f"expected an (n, 3) array of points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Loop:
    """Closed oriented polyline acting as the virtual conductor.

    ``vertices`` is an (n, 3) float array, n >= 3.  Segment i runs from
    vertex i to vertex (i+1) mod n, so there are exactly n segments.
    """

    vertices: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.vertices)
        if pts.shape[0] < 3:
            raise InvalidParameterError("a loop needs at least 3 vertices")
        gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if gaps.min() <= MIN_VERTEX_SEPARATION:
            raise InvalidParameterError(
                f"consecutive vertices must be > {MIN_VERTEX_SEPARATION} m apart"
            )
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def segments(self) -> np.ndarray:
        """Segment vectors, one per vertex (wraps around)."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def midpoints(self) -> np.ndarray:
        """Segment midpoints, aligned with :meth:`segments`."""
        return self.vertices + 0.5 * self.segments()

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def diameter(self) -> float:
        c = self.centroid()
        return 2.0 * float(np.linalg.norm(self.vertices - c, axis=1).max())

    def reversed(self) -> "Loop":
        """Flip orientation (reverses the virtual current) and nothing else."""
        return Loop(self.vertices[::-1])

    def translated(self, offset) -> "Loop":
        return Loop(self.vertices + np.asarray(offset, dtype=float))

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)) -> "Loop":
        rot = np.asarray(rotation, dtype=float)
        return Loop(self.vertices @ rot.T + np.asarray(translation, dtype=float))


@dataclass(frozen=True)
class LoopFrame:
    """Orthonormal right-handed frame fitted to a near-planar loop.

    ``v_p1 x v_p2 = v_n`` and the loop's signed area about ``v_n`` is
    positive, which ties the normal sign to the current orientation.
    """

    centroid: np.ndarray
    v_n: np.ndarray
    v_p1: np.ndarray
    v_p2: np.ndarray

    def to_plane_coords(self, points: np.ndarray) -> np.ndarray:
        """Project points into (p1, p2) plane coordinates about the centroid."""
        rel = np.atleast_2d(points) - self.centroid
        return np.stack([rel @ self.v_p1, rel @ self.v_p2], axis=-1)

    def height(self, point) -> float:
        """Signed distance of a point from the frame plane (along v_n)."""
        return float((np.asarray(point, dtype=float) - self.centroid) @ self.v_n)


def reverse(loop: Loop) -> Loop:
    return loop.reversed()


def signed_area(loop: Loop, normal) -> float:
    """Signed area of the loop about ``normal`` (shoelace about the centroid)."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    rel = loop.vertices - loop.centroid()
    crosses = np.cross(rel, np.roll(rel, -1, axis=0))
    return 0.5 * float(crosses.sum(axis=0) @ n)


def _orthonormal_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane basis (e1, e2) with e1 x e2 = normal."""
    n = normal / np.linalg.norm(normal)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    e1 = np.cross(helper, n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def make_circle(radius: float, angular_step: float, center=(0.0, 0.0, 0.0),
                normal=(0.0, 0.0, 1.0)) -> Loop:
    """Discretized circle, counter-clockwise about ``normal``.

    Vertices sit at angles k * angular_step for k = 0 .. ceil(2*pi/step) - 1.
    """
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    if not 0 < angular_step < np.pi:
        raise InvalidParameterError("angular_step must be in (0, pi)")
    n = int(np.ceil(2.0 * np.pi / angular_step))
    angles = np.arange(n) * angular_step
    e1, e2 = _orthonormal_basis(np.asarray(normal, dtype=float))
    pts = (np.asarray(center, dtype=float)
           + radius * np.outer(np.cos(angles), e1)
           + radius * np.outer(np.sin(angles), e2))
    return Loop(pts)


def make_folded(radius: float, angular_step: float, fold_angle: float) -> Loop:
    """Circle in the XY plane folded along the X-axis diameter.

    Vertices with y > 0 are rotated by ``fold_angle`` about the X axis;
    fold_angle = 0 reproduces the flat circle, pi/2 gives the 90-degree fold.
    """
    if not 0 <= fold_angle <= np.pi:
        raise InvalidParameterError("fold_angle must be in [0, pi]")
    flat = make_circle(radius, angular_step)
    pts = flat.vertices.copy()
    upper = pts[:, 1] > 0
    c, s = np.cos(fold_angle), np.sin(fold_angle)
    y, z = pts[upper, 1], pts[upper, 2]
    pts[upper, 1] = c * y - s * z
    pts[upper, 2] = s * y + c * z
    return Loop(pts)


def make_double(radius: float, angular_step: float, pitch: float) -> Loop:
    """Two-turn helical loop closed by a return segment.

    The angle runs 0 .. 4*pi with the axial coordinate rising by ``pitch``
    per turn; the implicit closing segment returns from the top of the
    second turn to the start.
    """
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    if not 0 < angular_step < np.pi:
        raise InvalidParameterError("angular_step must be in (0, pi)")
    if pitch < 0:
        raise InvalidParameterError("pitch must be >= 0")
    n = int(np.ceil(4.0 * np.pi / angular_step))
    angles = np.arange(n) * angular_step
    pts = np.stack([radius * np.cos(angles),
                    radius * np.sin(angles),
                    pitch * angles / (2.0 * np.pi)], axis=1)
    return Loop(pts)


def fit_plane_frame(loop: Loop) -> LoopFrame:
    """Least-squares plane frame over all vertices.

    The normal sign is fixed so the loop's signed area about it is positive;
    the first in-plane axis is anchored to the first vertex's direction from
    the centroid so identical loops always get identical frames.
    """
    c = loop.centroid()
    rel = loop.vertices - c
    # 3x3 scatter matrix; the eigenvector of the smallest eigenvalue is the
    # least-squares plane normal.
    cov = rel.T @ rel
    w, v = np.linalg.eigh(cov)
    if w[1] <= 1e-12 * max(w[2], 1e-300):
        raise DegenerateGeometryError("loop vertices are (nearly) collinear")
    v_n = v[:, 0]
    crosses = np.cross(rel, np.roll(rel, -1, axis=0)).sum(axis=0)
    area2 = float(crosses @ v_n)
    if abs(area2) < 1e-15:
        raise DegenerateGeometryError("loop has no signed area about the fitted normal")
    if area2 < 0:
        v_n = -v_n
    p1 = rel[0] - (rel[0] @ v_n) * v_n
    norm_p1 = np.linalg.norm(p1)
    if norm_p1 < 1e-12:
        raise DegenerateGeometryError("first vertex coincides with the centroid axis")
    v_p1 = p1 / norm_p1
    v_p2 = np.cross(v_n, v_p1)
    return LoopFrame(centroid=c, v_n=v_n, v_p1=v_p1, v_p2=v_p2)


def plane_crossing(p0, p1, frame: LoopFrame) -> Optional[tuple[np.ndarray, int]]:
    """Intersection of segment p0->p1 with the frame plane, if any.

    Returns (point, sign) where sign is +1 when the segment crosses along
    +v_n and -1 along -v_n.  Touching the plane exactly at one endpoint
    counts as a crossing; a segment lying in the plane does not.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d0 = frame.height(p0)
    d1 = frame.height(p1)
    if d0 == 0.0 and d1 == 0.0:
        return None
    if d0 * d1 > 0.0:
        return None
    if d0 == d1:
        return None
    t = d0 / (d0 - d1)
    point = p0 + t * (p1 - p0)
    sign = 1 if d1 > d0 else -1
    return point, sign


def winding_number_2d(polygon: np.ndarray, point: np.ndarray) -> int:
    """Winding number of a closed 2D polygon about a point (crossing method)."""
    v = polygon - point
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    # is-left test: cross product of the segment with the vector to the point
    left = x * yn - xn * y
    upward = (y <= 0) & (yn > 0) & (left > 0)
    downward = (y > 0) & (yn <= 0) & (left < 0)
    return int(np.count_nonzero(upward)) - int(np.count_nonzero(downward))


def point_inside_planar(loop: Loop, frame: LoopFrame, p) -> bool:
    """Whether a near-plane point lies inside the loop (nonzero winding)."""
    p = np.asarray(p, dtype=float)
    tol = 1e-6 * loop.diameter()
    if abs(frame.height(p)) > tol:
        raise InvalidParameterError("point is too far from the loop plane")
    poly2d = frame.to_plane_coords(loop.vertices)
    pt2d = frame.to_plane_coords(p)[0]
    return winding_number_2d(poly2d, pt2d) != 0


def save_loop(loop: Loop, dest: Union[str, os.PathLike, TextIO]) -> None:
    """Write a loop as plain text, one `x y z` line per vertex."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            save_loop(loop, fh)
        return
    dest.write("# knotfield loop: one vertex per line, x y z in meters\n")
    for v in loop.vertices:
        dest.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")


def load_loop(src: Union[str, os.PathLike, TextIO]) -> Loop:
    """Read a loop from the plain-text `x y z` format; `#` starts a comment."""
    if isinstance(src, (str, os.PathLike)):
        with open(src, "r", encoding="utf-8") as fh:
            return load_loop(fh)
    pts = []
    for lineno, line in enumerate(src, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise InvalidParameterError(f"line {lineno}: expected 3 coordinates, got {len(parts)}")
        pts.append([float(x) for x in parts])
    return Loop(np.array(pts, dtype=float))


def loads_loop(text: str) -> Loop:
    return load_loop(io.StringIO(text))
