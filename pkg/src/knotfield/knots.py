"""Hybrid-control knot tying: world state, basic actions, and knot programs.

The world is a kinematic two-arm robot with a mobile base, a
follow-the-leader rope, and an externally supplied anchoring loop.  The
five basic actions (grasp, release, twist, turn base, insertion) are
behavior-tree leaves with explicit switching conditions; knot programs
compose them per the step lists for the unknot / 3_1 / 4_1 / 5_2 / 7_3
family.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .field import flux_magnitude, offset as field_offset
from .bt import Leaf, Node, SelectorStar, Sequence, SequenceStar, Status, tick_bt
from .errors import InvalidParameterError, KnotFieldError, NoLoopError
from .field import FieldParams
from .geometry import Loop, fit_plane_frame, make_circle
from .insertion import linking_number
from .rope import Rope, find_crossings, make_straight_rope, rope_update

AnchorProvider = Callable[[int], Loop]


# ---------------------------------------------------------------------------
# world state


@dataclass
class ArmState:
    position: np.ndarray
    closed: bool = False
    binding: Optional[int] = None   # rope point index held by a closed gripper


@dataclass
class BaseState:
    x: float
    y: float
    heading: float

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class WorldConfig:
    arm_step: float = 0.02              # max arm motion per tick (m)
    base_step: float = 0.01             # max base translation per tick (m)
    base_turn_step: float = 0.04        # max heading change per tick (rad)
    twist_turn_step: float = 0.04       # twist arc angular step per tick (rad)
    grasp_tol: float = 1e-3
    reach_radius: float = 4.0
    shoulder_height: float = 0.45
    base_standoff: float = 0.6          # approach distance from the anchor
    staging_distance: float = 0.35      # receiver staging beyond the loop
    gamma: float = 0.02                 # insertion step length
    stop_persistence: int = 3
    insertion_max_iters: int = 4000
    max_ticks: int = 60000


class World:
    """Mutable simulation state ticked by a single behavior tree."""

    def __init__(self, rope: Rope, anchor_provider: AnchorProvider,
                 base: BaseState, arm_positions, config: Optional[WorldConfig] = None):
        self.config = config or WorldConfig()
        self.rope = rope
        self.anchor_provider = anchor_provider
        self.base = base
        self.arms = [ArmState(position=np.asarray(p, dtype=float).copy())
                     for p in arm_positions]
        if len(self.arms) != 2:
            raise InvalidParameterError("world needs exactly two arms")
        self.tick_count = 0
        self.counters = {"insertion": 0, "twist": 0}
        self.active_step = ""
        self.rope_loop_span: Optional[tuple[int, int]] = None

    # -- queries ----------------------------------------------------------

    def anchor(self) -> Loop:
        return self.anchor_provider(self.tick_count)

    def facing(self) -> np.ndarray:
        return np.array([np.cos(self.base.heading), np.sin(self.base.heading), 0.0])

    def shoulder(self) -> np.ndarray:
        return np.array([self.base.x, self.base.y, self.config.shoulder_height])

    def holder_of(self, rope_index: int) -> Optional[int]:
        for i, arm in enumerate(self.arms):
            if arm.closed and arm.binding == rope_index:
                return i
        return None

    def free_arm(self) -> Optional[int]:
        for i, arm in enumerate(self.arms):
            if not arm.closed:
                return i
        return None

    def reachable(self, point) -> bool:
        # the base can translate freely in the plane, so only the vertical
        # offset from the shoulder limits reach
        dz = abs(float(point[2]) - self.config.shoulder_height)
        return dz <= self.config.reach_radius

    # -- mutation ---------------------------------------------------------

    def move_arm_toward(self, arm_index: int, target, max_step: Optional[float] = None) -> bool:
        """Proportional position step clipped to the arm speed; True if at target."""
        arm = self.arms[arm_index]
        target = np.asarray(target, dtype=float)
        delta = target - arm.position
        dist = float(np.linalg.norm(delta))
        step = self.config.arm_step if max_step is None else max_step
        if dist <= step:
            arm.position = target.copy()
            return True
        arm.position = arm.position + (step / dist) * delta
        return False

    def set_arm_position(self, arm_index: int, position) -> None:
        self.arms[arm_index].position = np.asarray(position, dtype=float).copy()

    def move_base_toward(self, target_xy, target_heading: float) -> bool:
        cfg = self.config
        target_xy = np.asarray(target_xy, dtype=float)
        old_pos = self.base.position()
        delta = target_xy - old_pos
        dist = float(np.linalg.norm(delta))
        if dist <= cfg.base_step:
            new_pos = target_xy
        else:
            new_pos = old_pos + (cfg.base_step / dist) * delta
        err = _wrap_angle(target_heading - self.base.heading)
        dth = float(np.clip(err, -cfg.base_turn_step, cfg.base_turn_step))
        self._apply_base_motion(new_pos - old_pos, dth)
        return (float(np.linalg.norm(target_xy - self.base.position())) < 1e-9
                and abs(_wrap_angle(target_heading - self.base.heading)) < 1e-9)

    def turn_base(self, dtheta: float) -> None:
        dtheta = float(np.clip(dtheta, -self.config.base_turn_step, self.config.base_turn_step))
        self._apply_base_motion(np.zeros(2), dtheta)

    def _apply_base_motion(self, translation_xy: np.ndarray, dtheta: float) -> None:
        """Move the base; the arms ride along rigidly."""
        center = np.array([self.base.x, self.base.y, 0.0])
        c, s = np.cos(dtheta), np.sin(dtheta)
        for arm in self.arms:
            rel = arm.position - center
            rel = np.array([c * rel[0] - s * rel[1],
                            s * rel[0] + c * rel[1],
                            rel[2]])
            arm.position = center + rel + np.array([translation_xy[0], translation_xy[1], 0.0])
        self.base.x += float(translation_xy[0])
        self.base.y += float(translation_xy[1])
        self.base.heading = _wrap_angle(self.base.heading + dtheta)

    def finalize_tick(self) -> None:
        """Apply rope constraints for bound grippers and advance time."""
        bindings = {arm.binding: arm.position
                    for arm in self.arms if arm.closed and arm.binding is not None}
        if bindings:
            self.rope = rope_update(self.rope, bindings)
        self.tick_count += 1


def _wrap_angle(a: float) -> float:
    return float((a + np.pi) % (2.0 * np.pi) - np.pi)


# ---------------------------------------------------------------------------
# arm / target selectors (resolved and latched at a leaf's first tick)

R0 = "R0"
RF = "Rf"


def _rope_index(world: World, end: str) -> int:
    return world.rope.end_r0 if end == R0 else world.rope.end_rf


# ---------------------------------------------------------------------------
# basic actions as stateful behavior-tree leaves


class ActionLeaf(Leaf):
    """Base for action leaves: done-latching plus a name for logs."""

    def __init__(self, name: str):
        self.name = name
        self._done = False

    def reset(self) -> None:
        self._done = False

    def tick(self, world: World) -> Status:
        world.active_step = self.name
        if self._done:
            maintained = self.maintain(world)
            if maintained is not None:
                return maintained
            return Status.SUCCESS
        status = self.run(world)
        if status is Status.SUCCESS:
            self._done = True
            self.on_done(world)
        return status

    def run(self, world: World) -> Status:
        raise NotImplementedError

    def maintain(self, world: World) -> Optional[Status]:
        """Re-tick behavior after completion (plain Sequence parents only)."""
        return None

    def on_done(self, world: World) -> None:
        pass


class ApproachLoop(ActionLeaf):
    """Track the anchoring entity with the base; stays active all task."""

    def __init__(self, position_tol: float = 0.05, heading_tol: float = 0.1):
        super().__init__("approach-loop")
        self.position_tol = position_tol
        self.heading_tol = heading_tol

    def run(self, world: World) -> Status:
        anchor = world.anchor()
        frame = fit_plane_frame(anchor)
        horiz = frame.v_n[:2].copy()
        norm = np.linalg.norm(horiz)
        if norm < 1e-9:
            horiz = np.array([1.0, 0.0])
        else:
            horiz /= norm
        target_xy = frame.centroid[:2] - world.config.base_standoff * horiz
        target_heading = float(np.arctan2(horiz[1], horiz[0]))
        world.move_base_toward(target_xy, target_heading)
        pos_err = float(np.linalg.norm(world.base.position() - target_xy))
        head_err = abs(_wrap_angle(target_heading - world.base.heading))
        if pos_err <= self.position_tol and head_err <= self.heading_tol:
            return Status.SUCCESS
        return Status.RUNNING

    def maintain(self, world: World) -> Optional[Status]:
        # keep correcting every tick; report SUCCESS while within tolerance
        return self.run(world)


class GraspRope(ActionLeaf):
    """Move an arm to a rope point and close the gripper there.

    ``arm`` is an index, or "free" to latch the lowest-index open arm, or
    "other:<end>" for the arm not holding that rope end.  Double-binding a
    point already held by the other gripper is allowed (hand-over).
    """

    def __init__(self, arm, target_end: str, name: Optional[str] = None):
        super().__init__(name or f"grasp-{target_end}")
        self.arm_sel = arm
        self.target_end = target_end
        self._arm: Optional[int] = None

    def reset(self) -> None:
        super().reset()
        self._arm = None

    def _resolve_arm(self, world: World) -> Optional[int]:
        if isinstance(self.arm_sel, int):
            return self.arm_sel
        if self.arm_sel == "free":
            return world.free_arm()
        if isinstance(self.arm_sel, str) and self.arm_sel.startswith("other:"):
            holder = world.holder_of(_rope_index(world, self.arm_sel.split(":", 1)[1]))
            if holder is None:
                return world.free_arm()
            return 1 - holder
        raise InvalidParameterError(f"bad arm selector {self.arm_sel!r}")

    def run(self, world: World) -> Status:
        if self._arm is None:
            self._arm = self._resolve_arm(world)
            if self._arm is None:
                return Status.FAILURE
        idx = _rope_index(world, self.target_end)
        arm = world.arms[self._arm]
        if arm.closed and arm.binding == idx:
            return Status.SUCCESS
        if arm.closed:
            return Status.FAILURE   # grippers hold one point at a time
        target = world.rope.points[idx]
        if not world.reachable(target):
            return Status.FAILURE
        if world.move_arm_toward(self._arm, target):
            arm.closed = True
            arm.binding = idx
            return Status.SUCCESS
        return Status.RUNNING

    def maintain(self, world: World) -> Optional[Status]:
        arm = world.arms[self._arm] if self._arm is not None else None
        idx = _rope_index(world, self.target_end)
        if arm is not None and arm.closed and arm.binding == idx:
            return Status.SUCCESS
        # dropped the rope: re-grasp (Fig-7 style fallback re-entry)
        self._done = False
        return self.run(world)


class ReleaseRope(ActionLeaf):
    """Open a gripper; the arm reference stays at its previous point."""

    def __init__(self, arm, name: Optional[str] = None):
        super().__init__(name or "release")
        self.arm_sel = arm

    def _resolve_arm(self, world: World) -> Optional[int]:
        if isinstance(self.arm_sel, int):
            return self.arm_sel
        if isinstance(self.arm_sel, str) and self.arm_sel.startswith("holder:"):
            return world.holder_of(_rope_index(world, self.arm_sel.split(":", 1)[1]))
        raise InvalidParameterError(f"bad arm selector {self.arm_sel!r}")

    def run(self, world: World) -> Status:
        arm_index = self._resolve_arm(world)
        if arm_index is None:
            return Status.SUCCESS   # nothing holds that point: vacuous release
        arm = world.arms[arm_index]
        arm.closed = False
        arm.binding = None
        return Status.SUCCESS


class HandOver(ActionLeaf):
    """Transfer a rope end between arms (transient double binding)."""

    def __init__(self, rope_end: str, name: Optional[str] = None):
        super().__init__(name or f"handover-{rope_end}")
        self.rope_end = rope_end
        self._from: Optional[int] = None
        self._to: Optional[int] = None

    def reset(self) -> None:
        super().reset()
        self._from = None
        self._to = None

    def run(self, world: World) -> Status:
        idx = _rope_index(world, self.rope_end)
        if self._from is None:
            self._from = world.holder_of(idx)
            if self._from is None:
                return Status.FAILURE
            self._to = 1 - self._from
        to_arm = world.arms[self._to]
        if not to_arm.closed:
            target = world.rope.points[idx]
            if not world.reachable(target):
                return Status.FAILURE
            if world.move_arm_toward(self._to, target):
                to_arm.closed = True
                to_arm.binding = idx
            else:
                return Status.RUNNING
        from_arm = world.arms[self._from]
        from_arm.closed = False
        from_arm.binding = None
        return Status.SUCCESS


class _ArcTwist(ActionLeaf):
    """Shared machinery: swing both grippers through a half-turn arc.

    The arc rotates both gripper references about the axis along the
    robot's facing direction through the midpoint between the grippers;
    after half a turn the grippers have swapped sides, wrapping the rope
    into a projected crossing.
    """

    def __init__(self, name: str, turn_base_too: bool):
        super().__init__(name)
        self.turn_base_too = turn_base_too
        self._theta = 0.0
        self._initialized = False
        self._mid = None
        self._axis = None
        self._rel = None
        self._heading_turned = 0.0

    def reset(self) -> None:
        super().reset()
        self._theta = 0.0
        self._initialized = False
        self._heading_turned = 0.0

    def run(self, world: World) -> Status:
        if not self._initialized:
            if not all(a.closed and a.binding is not None for a in world.arms):
                return Status.FAILURE
            a, b = world.arms[0].position, world.arms[1].position
            self._mid = 0.5 * (a + b)
            self._axis = world.facing()
            self._rel = (a - self._mid, b - self._mid)
            self._initialized = True
        if not all(a.closed for a in world.arms):
            return Status.FAILURE   # rope dropped mid-twist
        cfg = world.config
        self._theta = min(self._theta + cfg.twist_turn_step, np.pi)
        rot = _axis_rotation(self._axis, self._theta)
        for i in (0, 1):
            world.set_arm_position(i, self._mid + rot @ self._rel[i])
        if self.turn_base_too:
            remaining = np.pi - self._heading_turned
            dth = min(cfg.base_turn_step, remaining)
            world.turn_base(dth)
            self._heading_turned += dth
        arc_done = self._theta >= np.pi
        base_done = (not self.turn_base_too) or self._heading_turned >= np.pi - 1e-12
        if arc_done and base_done:
            return Status.SUCCESS
        return Status.RUNNING

    def on_done(self, world: World) -> None:
        world.counters["twist"] += 1


class TwistRope(_ArcTwist):
    """Both manipulators follow a circular trajectory forming a rope loop."""

    def __init__(self, name: str = "twist-rope"):
        super().__init__(name, turn_base_too=False)


class TurnBase(_ArcTwist):
    """Rotate the base by pi about itself; the riding manipulators twist
    the rope along the same arc (redundant with TwistRope)."""

    def __init__(self, name: str = "turn-base"):
        super().__init__(name, turn_base_too=True)


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    a = axis / np.linalg.norm(axis)
    k = np.array([[0.0, -a[2], a[1]],
                  [a[2], 0.0, -a[0]],
                  [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


class Insertion(ActionLeaf):
    """Field-guided insertion of a held rope end through a target loop.

    The carrying arm follows the normalized field of the live loop until
    the flux drops persistently; a free receiving arm stages itself on the
    opposite side and follows the reversed-orientation field to meet it.
    A receiving arm that is still holding rope keeps its position; the
    hand-over then happens in later steps.
    """

    def __init__(self, rope_end: str, source: str, name: Optional[str] = None):
        if source not in ("anchor", "rope-loop"):
            raise InvalidParameterError(f"unknown insertion source {source!r}")
        super().__init__(name or f"insert-{rope_end}-{source}")
        self.rope_end = rope_end
        self.source = source
        self._carrier: Optional[int] = None
        self._receiver: Optional[int] = None
        self._flip = False
        self._iters = 0
        self._carrier_flux: list[float] = []
        self._receiver_flux: list[float] = []
        self._carrier_done = False
        self._receiver_done = False
        self._receiver_staged = False
        self._rope_range = None
        self._pull_left: Optional[float] = None
        self._pull_dir: Optional[np.ndarray] = None

    def reset(self) -> None:
        super().reset()
        self._carrier = None
        self._receiver = None
        self._iters = 0
        self._carrier_flux = []
        self._receiver_flux = []
        self._carrier_done = False
        self._receiver_done = False
        self._receiver_staged = False
        self._rope_range = None
        self._pull_left = None
        self._pull_dir = None

    def _live_loop(self, world: World) -> Loop:
        if self.source == "anchor":
            loop = world.anchor()
        else:
            # the crossing's vertex range is latched at the first tick so the
            # carrier's own dragged rope end cannot hijack the extraction by
            # creating a new, earlier projected crossing mid-run
            if self._rope_range is None:
                crossings = find_crossings(world.rope, world.facing())
                if crossings:
                    i, j, _, _ = crossings[0]
                    if j - i < 3:
                        raise NoLoopError("projected crossing encloses too few rope points")
                    self._rope_range = (i + 1, j + 1)
                    # remember which rope material forms the constructed loop:
                    # once the end has been pulled through, the projection may
                    # no longer self-intersect even though the same stretch of
                    # rope is still the loop to thread on a repeated insertion
                    world.rope_loop_span = self._rope_range
                elif world.rope_loop_span is not None:
                    self._rope_range = world.rope_loop_span
                else:
                    raise NoLoopError("rope has no crossing in the projection")
            lo, hi = self._rope_range
            loop = Loop(world.rope.points[lo:hi])
        if self._flip:
            loop = loop.reversed()
        return loop

    def run(self, world: World) -> Status:
        cfg = world.config
        idx = _rope_index(world, self.rope_end)
        if self._carrier is None:
            carrier = world.holder_of(idx)
            if carrier is None:
                return Status.FAILURE   # precondition: end must be held
            self._carrier = carrier
            receiver = 1 - carrier
            self._receiver = receiver
            self._receiver_done = world.arms[receiver].closed   # bound arm holds still
            try:
                loop = self._live_loop(world)
                frame = fit_plane_frame(loop)
                if frame.height(world.arms[carrier].position) > 0:
                    self._flip = True
            except KnotFieldError:
                return Status.FAILURE

        self._iters += 1
        if self._iters > cfg.insertion_max_iters:
            return Status.FAILURE

        params = FieldParams(gamma=cfg.gamma)
        carrier_arm = world.arms[self._carrier]
        try:
            loop = self._live_loop(world)
        except KnotFieldError:
            return Status.FAILURE

        if not self._carrier_done:
            if self._pull_left is not None:
                # guided phase stopped at the loop plane; carry the end an
                # extra stretch along the travel direction so it comes out
                # clearly on the far side (threads, not just touches)
                move = min(cfg.arm_step, self._pull_left)
                world.set_arm_position(
                    self._carrier, carrier_arm.position + move * self._pull_dir)
                self._pull_left -= move
                if self._pull_left <= 1e-12:
                    self._carrier_done = True
            else:
                try:
                    delta = field_offset(loop, carrier_arm.position, params)
                except KnotFieldError:
                    return Status.FAILURE
                self._pull_dir = delta / np.linalg.norm(delta)
                world.set_arm_position(self._carrier, carrier_arm.position + delta)
                f = _safe_flux(loop, world.arms[self._carrier].position, params)
                if f is None:
                    return Status.FAILURE
                self._carrier_flux.append(f)
                if _dropped(self._carrier_flux, cfg.stop_persistence):
                    self._pull_left = cfg.staging_distance

        if not self._receiver_done:
            rec_arm = world.arms[self._receiver]
            rec_loop = loop.reversed()   # approach from the opposite side
            frame = fit_plane_frame(loop)
            if not self._receiver_staged:
                staging = frame.centroid + cfg.staging_distance * frame.v_n
                if world.move_arm_toward(self._receiver, staging):
                    self._receiver_staged = True
            else:
                try:
                    delta = field_offset(rec_loop, rec_arm.position, params)
                except KnotFieldError:
                    return Status.FAILURE
                world.set_arm_position(self._receiver, rec_arm.position + delta)
                f = _safe_flux(rec_loop, world.arms[self._receiver].position, params)
                if f is None:
                    return Status.FAILURE
                self._receiver_flux.append(f)
                if _dropped(self._receiver_flux, cfg.stop_persistence):
                    self._receiver_done = True

        if self._carrier_done and self._receiver_done:
            return Status.SUCCESS
        return Status.RUNNING

    def on_done(self, world: World) -> None:
        world.counters["insertion"] += 1


def _safe_flux(loop: Loop, x: np.ndarray, params: FieldParams) -> Optional[float]:
    try:
        return flux_magnitude(loop, x, params)
    except KnotFieldError:
        return None


def _dropped(flux: list[float], k: int) -> bool:
    """True once the flux has decreased for k consecutive samples."""
    if len(flux) < k + 1:
        return False
    tail = flux[-(k + 1):]
    return all(b < a for a, b in zip(tail, tail[1:]))


# ---------------------------------------------------------------------------
# functional wrappers matching the basic-action vocabulary

def act_grasp(arm, target_end: str) -> GraspRope:
    return GraspRope(arm, target_end)


def act_release(arm) -> ReleaseRope:
    return ReleaseRope(arm)


def act_twist() -> TwistRope:
    return TwistRope()


def act_turn_base() -> TurnBase:
    return TurnBase()


def act_insertion(rope_end: str, source: str) -> Insertion:
    return Insertion(rope_end, source)


# ---------------------------------------------------------------------------
# knot programs

PROGRAMS: dict[str, list[str]] = {
    "unknot": ["1", "2", "3", "4", "5"],
    "3_1": ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"],
    "4_1": ["1", "2", "3", "4", "5", "6", "6", "7", "8", "9", "10"],
    "5_2": ["1", "2", "3", "4", "5", "6", "6", "6", "7", "8", "9", "10"],
    "7_3": ["1", "2", "3", "4", "5", "6", "6", "6",
            "7", "8", "9", "7", "8", "9", "7", "8", "9", "10"],
}

# counts of completed insertion / twist actions each program must produce
PROGRAM_COUNTS: dict[str, tuple[int, int]] = {
    "unknot": (1, 0),
    "3_1": (2, 1),
    "4_1": (2, 2),
    "5_2": (2, 3),
    "7_3": (4, 3),
}


@dataclass(frozen=True)
class KnotProgram:
    name: str
    steps: tuple[str, ...]


def knot_program(name: str) -> KnotProgram:
    if name not in PROGRAMS:
        raise InvalidParameterError(
            f"unknown knot program {name!r}; choose from {sorted(PROGRAMS)}")
    return KnotProgram(name=name, steps=tuple(PROGRAMS[name]))


def parse_program(text: str, name: str = "custom") -> KnotProgram:
    """Parse a plain-text program: one `step N` (or `step 6.1`) per line."""
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2 or parts[0] != "step":
            raise InvalidParameterError(f"line {lineno}: expected `step <n>`, got {body!r}")
        token = parts[1]
        if token not in {"1", "2", "3", "4", "5", "6", "6.1", "6.2", "7", "8", "9", "10"}:
            raise InvalidParameterError(f"line {lineno}: unknown step {token!r}")
        steps.append(token)
    if not steps:
        raise InvalidParameterError("empty program")
    return KnotProgram(name=name, steps=tuple(steps))


def serialize_program(program: KnotProgram) -> str:
    return "\n".join(f"step {s}" for s in program.steps) + "\n"


def _make_step(token: str) -> Node:
    if token == "2":
        return GraspRope("free", RF, name="grasp-Rf")
    if token == "3":
        return Insertion(RF, "anchor", name="insert-Rf-anchor")
    if token == "4":
        return HandOver(RF)
    if token == "5":
        return GraspRope("free", R0, name="grasp-R0")
    if token == "6":
        return SelectorStar([TurnBase(), TwistRope()], name="construct-rope-loop")
    if token == "6.1":
        return TurnBase()
    if token == "6.2":
        return TwistRope()
    if token == "7":
        return Insertion(R0, "rope-loop", name="insert-R0-rope-loop")
    if token == "8":
        return ReleaseRope(f"holder:{RF}", name="release-Rf")
    if token == "9":
        return HandOver(R0)
    if token == "10":
        return GraspRope("free", RF, name="grasp-Rf-final")
    raise InvalidParameterError(f"unknown step token {token!r}")


def build_program_tree(program: KnotProgram) -> Node:
    """Sequence(track-loop, Sequence*(steps)) per the behavior-tree layout;
    steps 2 and 3 share a plain Sequence so a dropped rope re-grasps."""
    steps = list(program.steps)
    if not steps or steps[0] != "1":
        raise InvalidParameterError("programs must start with step 1 (approach loop)")
    inner: list[Node] = []
    i = 1
    while i < len(steps):
        token = steps[i]
        if token == "2" and i + 1 < len(steps) and steps[i + 1] == "3":
            inner.append(Sequence([_make_step("2"), _make_step("3")], name="grasp-and-insert"))
            i += 2
            continue
        inner.append(_make_step(token))
        i += 1
    return Sequence([ApproachLoop(), SequenceStar(inner, name="knot-steps")],
                    name=f"knot-{program.name}")


# ---------------------------------------------------------------------------
# running programs


@dataclass
class LogRow:
    tick: int
    active_step: str
    status: str
    base_x: float
    base_y: float
    heading: float
    arm1: tuple[float, float, float]
    arm2: tuple[float, float, float]


@dataclass
class KnotResult:
    completed: bool
    log: list[LogRow] = dc_field(default_factory=list)
    insertion_count: int = 0
    twist_count: int = 0
    link_check: Optional[int] = None
    ticks: int = 0
    failure_step: Optional[str] = None


def make_default_world(seed: int = 0,
                       anchor_provider: Optional[AnchorProvider] = None,
                       config: Optional[WorldConfig] = None,
                       anchor_radius: float = 0.25,
                       anchor_segments_scale: int = 1,
                       rope_points: int = 140) -> World:
    """Desk-scale default scene: vertical anchor circle ahead of the robot,
    rope laid out to its side, slight seeded jitter for trial diversity."""
    rng = np.random.default_rng(seed)
    cfg = config or WorldConfig()
    if anchor_provider is None:
        step = 0.1 / max(1, anchor_segments_scale)
        anchor = make_circle(anchor_radius, step,
                             center=(0.9, 0.0, 0.5), normal=(1.0, 0.0, 0.0))
        anchor_provider = lambda t: anchor
    jitter = rng.uniform(-0.02, 0.02, size=2)
    rope = make_straight_rope((0.45 + jitter[0], 1.3, 0.42),
                              (0.45 + jitter[0], -1.5, 0.42), rope_points)
    base = BaseState(x=-0.3 + jitter[1], y=0.1, heading=0.0)
    arms = [np.array([0.0, 0.25, cfg.shoulder_height]),
            np.array([0.0, -0.25, cfg.shoulder_height])]
    return World(rope=rope, anchor_provider=anchor_provider, base=base,
                 arm_positions=arms, config=cfg)


def closed_rope_path(rope: Rope, clearance: float = 8.0) -> np.ndarray:
    """Rope vertices closed by a distant return arc high above the scene."""
    top = rope.points[:, 2].max() + clearance
    rf = rope.points[-1].copy()
    r0 = rope.points[0].copy()
    return np.vstack([
        rope.points,
        [rf[0], rf[1], top],
        [r0[0], r0[1], top],
    ])


def run_program(program, seed: int = 0,
                anchor_provider: Optional[AnchorProvider] = None,
                world: Optional[World] = None,
                config: Optional[WorldConfig] = None,
                log_every: int = 1,
                **world_kwargs) -> KnotResult:
    """Tick a knot program to completion and score it.

    ``link_check`` is the |Gauss linking number| between the rope path
    (closed by a far arc) and the anchoring loop at the final tick.
    """
    if isinstance(program, str):
        program = knot_program(program)
    if world is None:
        world = make_default_world(seed=seed, anchor_provider=anchor_provider,
                                   config=config, **world_kwargs)
    tree = build_program_tree(program)
    result = KnotResult(completed=False)
    status = Status.RUNNING
    while world.tick_count < world.config.max_ticks:
        status = tick_bt(tree, world)
        world.finalize_tick()
        if world.tick_count % log_every == 0:
            result.log.append(LogRow(
                tick=world.tick_count,
                active_step=world.active_step,
                status=status.value,
                base_x=world.base.x,
                base_y=world.base.y,
                heading=world.base.heading,
                arm1=tuple(world.arms[0].position),
                arm2=tuple(world.arms[1].position),
            ))
        if status is not Status.RUNNING:
            break
    result.ticks = world.tick_count
    result.completed = status is Status.SUCCESS
    if not result.completed:
        result.failure_step = world.active_step
    result.insertion_count = world.counters["insertion"]
    result.twist_count = world.counters["twist"]
    try:
        result.link_check = abs(linking_number(closed_rope_path(world.rope),
                                               world.anchor().vertices))
    except KnotFieldError:
        result.link_check = None
    return result
