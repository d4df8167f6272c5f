"""knotfield: virtual-magnetic-field rope insertion and knot tying.

A discretized Biot-Savart field around an arbitrary 3D loop guides a rope
end through the loop; a behavior-tree sequencer composes five basic
actions into knotting programs for a kinematic two-arm robot.
"""

from .bt import Leaf, Node, Selector, SelectorStar, Sequence, SequenceStar, Status, tick_bt
from .errors import (DegenerateDirectionError, DegenerateGeometryError,
                     IllConditionedError, InvalidParameterError, KnotFieldError,
                     NoInsertionError, NoLoopError, OverstretchError,
                     SingularityError)
from .field import (FieldParams, field, field_planar, flux_magnitude, offset,
                    offset_planar)
from .geometry import (Loop, LoopFrame, fit_plane_frame, load_loop, loads_loop,
                       make_circle, make_double, make_folded, plane_crossing,
                       point_inside_planar, save_loop, signed_area,
                       winding_number_2d)
from .insertion import (InsertionOutcome, InsertionParams, TrajectoryRecord,
                        detect_success, linking_number, run_insertion,
                        score_delay, score_quality, step)
from .knots import (KnotProgram, KnotResult, World, WorldConfig, knot_program,
                    make_default_world, parse_program, run_program,
                    serialize_program)
from .perturb import (MotionSpec, NoiseSpec, WaveSpec, deform_wave,
                      linear_translation, move_loop, perturb)
from .rope import (Rope, find_crossings, make_straight_rope, project_points,
                   rope_loop_extraction, rope_update)
from .sweep import (SweepConfig, SweepRow, SweepSummary, format_row,
                    format_summary, run_sweep, run_trial, summarize)

__version__ = "0.1.0"

__all__ = [
    "DegenerateDirectionError", "DegenerateGeometryError", "FieldParams",
    "IllConditionedError", "InsertionOutcome", "InsertionParams",
    "InvalidParameterError", "KnotFieldError", "KnotProgram", "KnotResult",
    "Leaf", "Loop", "LoopFrame", "MotionSpec", "NoInsertionError",
    "NoLoopError", "NoiseSpec", "Node", "OverstretchError", "Rope",
    "Selector", "SelectorStar", "Sequence", "SequenceStar", "SingularityError",
    "Status", "SweepConfig", "SweepRow", "SweepSummary", "TrajectoryRecord",
    "WaveSpec", "World", "WorldConfig", "deform_wave", "detect_success",
    "field", "field_planar", "find_crossings", "fit_plane_frame",
    "flux_magnitude", "format_row", "format_summary", "knot_program",
    "linear_translation", "linking_number", "load_loop", "loads_loop",
    "make_circle", "make_default_world", "make_double", "make_folded",
    "make_straight_rope", "move_loop", "offset", "offset_planar",
    "parse_program", "perturb", "plane_crossing", "point_inside_planar",
    "project_points", "rope_loop_extraction", "rope_update", "run_insertion",
    "run_program", "run_sweep", "run_trial", "save_loop", "score_delay",
    "score_quality", "serialize_program", "signed_area", "step",
    "summarize", "tick_bt", "winding_number_2d",
]
