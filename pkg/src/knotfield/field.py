"""Discretized guidance field of a current loop and derived offsets.

The field of the closed polyline is the segment-midpoint sum

    B(x) = scale_c * sum_i  dl_i x (x - m_i) / |x - m_i|^3

with dl_i the segment vector and m_i its midpoint.  The physical constants
(permeability, current intensity) are lumped into ``scale_c``; only the
orientation of the current, encoded by vertex order, changes behavior once
offsets are normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirectionError, InvalidParameterError, SingularityError
from .geometry import Loop, LoopFrame

EPS_SINGULAR = 1e-6   # minimum distance from a query point to the conductor
EPS_FIELD = 1e-12     # minimum field norm to define a direction


@dataclass(frozen=True)
class FieldParams:
    """Lumped field constant, step length, and planar weights.

    gamma is the per-iteration step length; alpha weighs the in-plane field
    components and beta the normal component when a frame is supplied.
    """

    scale_c: float = 1.0
    gamma: float = 0.01
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidParameterError("gamma must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameterError("alpha and beta must be non-negative")
        if self.alpha == 0 and self.beta == 0:
            raise InvalidParameterError("alpha and beta cannot both be zero")


def segment_distances(loop: Loop, x: np.ndarray) -> np.ndarray:
    """Distance from x to every loop segment."""
    v = loop.vertices
    d = loop.segments()
    rel = x - v
    t = np.einsum("ij,ij->i", rel, d) / np.einsum("ij,ij->i", d, d)
    np.clip(t, 0.0, 1.0, out=t)
    closest = v + t[:, None] * d
    return np.linalg.norm(x - closest, axis=1)


def field(loop: Loop, x, params: FieldParams) -> np.ndarray:
    """Guidance field vector at x; raises SingularityError near the wire."""
    x = np.asarray(x, dtype=float)
    if segment_distances(loop, x).min() <= EPS_SINGULAR:
        raise SingularityError("query point lies on or too close to the conductor")
    d = loop.segments()
    r = x - loop.midpoints()
    inv_r3 = np.einsum("ij,ij->i", r, r) ** -1.5
    contrib = np.cross(d, r) * inv_r3[:, None]
    return params.scale_c * contrib.sum(axis=0)


def flux_magnitude(loop: Loop, x, params: FieldParams) -> float:
    """Field intensity |B(x)|; the stopping signal for insertion."""
    return float(np.linalg.norm(field(loop, x, params)))


def offset(loop: Loop, x, params: FieldParams) -> np.ndarray:
    """Directional offset gamma * B/|B|; always of length gamma."""
    b = field(loop, x, params)
    norm = np.linalg.norm(b)
    if norm <= EPS_FIELD:
        raise DegenerateDirectionError("field magnitude too small to normalize")
    return (params.gamma / norm) * b


def field_planar(loop: Loop, frame: LoopFrame, x, params: FieldParams) -> np.ndarray:
    """Field with in-plane components weighted by alpha and the normal by beta."""
    b = field(loop, x, params)
    bp1 = b @ frame.v_p1
    bp2 = b @ frame.v_p2
    bn = b @ frame.v_n
    return (params.alpha * bp1) * frame.v_p1 \
        + (params.alpha * bp2) * frame.v_p2 \
        + (params.beta * bn) * frame.v_n


def offset_planar(loop: Loop, frame: LoopFrame, x, params: FieldParams) -> np.ndarray:
    """Normalized offset of the alpha/beta-weighted field; length gamma."""
    b = field_planar(loop, frame, x, params)
    norm = np.linalg.norm(b)
    if norm <= EPS_FIELD:
        raise DegenerateDirectionError("weighted field magnitude too small to normalize")
    return (params.gamma / norm) * b
