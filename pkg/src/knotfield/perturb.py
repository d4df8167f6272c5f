"""Per-tick loop variants: Gaussian vertex noise, wave deformation, rigid motion.

Noise is re-sampled around the nominal loop every tick rather than
accumulated, so the perturbed loop stays within a bounded band of the
nominal one no matter how long a run takes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError
from .geometry import Loop, LoopFrame, fit_plane_frame

ISOTROPIC = "isotropic"
CYLINDRICAL = "cylindrical"


@dataclass(frozen=True)
class NoiseSpec:
    """Vertex noise: isotropic per-axis, or cylindrical (coherent radial)."""

    kind: str
    sigma: float

    def __post_init__(self):
        if self.kind not in (ISOTROPIC, CYLINDRICAL):
            raise InvalidParameterError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be >= 0")


def perturb(nominal: Loop, spec: NoiseSpec, rng: np.random.Generator,
            frame: Optional[LoopFrame] = None) -> Loop:
    """Displace the nominal vertices by fresh Gaussian noise.

    Isotropic noise draws an independent per-axis Gaussian for every
    vertex.  Cylindrical noise draws one radial Gaussian per call and
    displaces the whole loop coherently along each vertex's outward radial
    direction (from the nominal centroid, in the nominal plane), i.e. the
    loop radius breathes about the axis of the enclosing cylinder; the
    normal and tangential components are exactly zero.
    """
    if spec.sigma == 0.0:
        return nominal
    verts = nominal.vertices
    if spec.kind == ISOTROPIC:
        return Loop(verts + rng.normal(0.0, spec.sigma, size=verts.shape))
    if frame is None:
        frame = fit_plane_frame(nominal)
    rel = verts - frame.centroid
    radial = rel - np.outer(rel @ frame.v_n, frame.v_n)
    radial /= np.linalg.norm(radial, axis=1)[:, None]
    g = rng.normal(0.0, spec.sigma)
    return Loop(verts + g * radial)


@dataclass(frozen=True)
class WaveSpec:
    """Cosine-wave deformation along the loop.

    The wave phase is the integral of a temporal frequency that chirps
    linearly, phase(t) = base_frequency*t + 0.5*chirp_rate*t^2, unless a
    custom ``phase_fn`` is supplied.  ``spatial_frequency`` must be a
    positive integer so the displaced loop stays closed.
    """

    amplitude: float
    direction: str = "perpendicular"   # or "parallel" (radial, in-plane)
    spatial_frequency: int = 2
    base_frequency: float = 1.0        # rad/s
    chirp_rate: float = 0.5            # rad/s^2
    phase_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidParameterError("amplitude must be >= 0")
        if self.direction not in ("parallel", "perpendicular"):
            raise InvalidParameterError(f"unknown wave direction {self.direction!r}")
        if int(self.spatial_frequency) != self.spatial_frequency or self.spatial_frequency < 1:
            raise InvalidParameterError("spatial_frequency must be an integer >= 1")

    def phase(self, t: float) -> float:
        if self.phase_fn is not None:
            return self.phase_fn(t)
        return self.base_frequency * t + 0.5 * self.chirp_rate * t * t

    def ratio_to(self, loop: Loop) -> float:
        """Amplitude over the loop's mean radius (reported as the wave ratio)."""
        c = loop.centroid()
        radius = float(np.linalg.norm(loop.vertices - c, axis=1).mean())
        return self.amplitude / radius


def deform_wave(nominal: Loop, spec: WaveSpec, t: float,
                frame: Optional[LoopFrame] = None) -> Loop:
    """Displace each vertex by A*cos(sf*theta + phase(t)) radially or normally."""
    if spec.amplitude == 0.0:
        return nominal
    if frame is None:
        frame = fit_plane_frame(nominal)
    verts = nominal.vertices
    rel = verts - frame.centroid
    p1 = rel @ frame.v_p1
    p2 = rel @ frame.v_p2
    theta = np.arctan2(p2, p1)
    wave = spec.amplitude * np.cos(spec.spatial_frequency * theta + spec.phase(t))
    if spec.direction == "perpendicular":
        return Loop(verts + np.outer(wave, frame.v_n))
    radial = rel - np.outer(rel @ frame.v_n, frame.v_n)
    radial /= np.linalg.norm(radial, axis=1)[:, None]
    return Loop(verts + wave[:, None] * radial)


@dataclass(frozen=True)
class MotionSpec:
    """Rigid pose trajectory with declared velocity/acceleration bounds.

    ``pose_fn(t)`` returns (rotation 3x3, translation 3); the declared
    bounds are reported alongside results, they are not enforced here.
    """

    pose_fn: Callable[[float], tuple[np.ndarray, np.ndarray]]
    max_speed: float = np.inf
    max_accel: float = np.inf


def move_loop(nominal: Loop, spec: MotionSpec, t: float) -> Loop:
    """Apply the rigid transform at time t about the nominal centroid."""
    rot, trans = spec.pose_fn(t)
    rot = np.asarray(rot, dtype=float)
    trans = np.asarray(trans, dtype=float)
    if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
        raise InvalidParameterError("pose transform must be finite")
    c = nominal.centroid()
    return Loop((nominal.vertices - c) @ rot.T + c + trans)


def linear_translation(velocity, max_accel: float = np.inf) -> MotionSpec:
    """Constant-velocity translation trajectory."""
    v = np.asarray(velocity, dtype=float)
    eye = np.eye(3)
    return MotionSpec(pose_fn=lambda t: (eye, v * t),
                      max_speed=float(np.linalg.norm(v)),
                      max_accel=max_accel)
