"""Tie five knots with the behavior-tree sequencer and verify the threading.

A knot program is a list of numbered steps over five basic actions
(approach, grasp, insert, hand over, twist/turn).  The insertion steps use
the same field guidance as the bare point runs, but the guided point is a
gripper dragging a kinematic rope.  After each run, the Gauss linking
number between the rope path and the anchoring loop confirms the rope
really went through.
"""

import time

from knotfield import run_program, serialize_program
from knotfield.knots import PROGRAM_COUNTS, knot_program

print("the trefoil program, step by step:")
print(serialize_program(knot_program("3_1")))

total = 0.0
print(f"{'program':8s} {'done':>4s} {'insertions':>10s} {'twists':>6s} "
      f"{'link':>4s} {'ticks':>5s} {'time':>6s}")
for name, expected in PROGRAM_COUNTS.items():
    t0 = time.perf_counter()
    result = run_program(name, seed=0)
    dt = time.perf_counter() - t0
    total += dt
    got = (result.insertion_count, result.twist_count)
    mark = "" if got == expected else f"  <- expected {expected}"
    print(f"{name:8s} {str(result.completed):>4s} {got[0]:>10d} {got[1]:>6d} "
          f"{str(result.link_check):>4s} {result.ticks:>5d} {dt:5.1f}s{mark}")
print(f"\nall five programs in {total:.1f} s")

# the same trefoil ties with either rope-loop construction: turning the
# base (6.1) or twisting with both arms (6.2); the default program lets a
# fallback selector pick whichever works first
from knotfield import parse_program

for token in ("6.1", "6.2"):
    steps = ["1", "2", "3", "4", "5", token, "7", "8", "9", "10"]
    program = parse_program("\n".join(f"step {s}" for s in steps),
                            name=f"3_1 via {token}")
    result = run_program(program, seed=0)
    print(f"{program.name}: completed={result.completed} "
          f"link={result.link_check}")
