"""Sample the guidance field around a loop and trace a few field lines.

The field of a closed current loop points through the opening and wraps
around the wire.  This script prints the analytic sanity checks at the
loop center and on the axis, then integrates a handful of field lines and
writes them to field_lines.csv for plotting.
"""

import numpy as np

from knotfield import FieldParams, field, make_circle

params = FieldParams()
loop = make_circle(radius=1.0, angular_step=0.1)

# --- sanity: compare against the analytic circular-loop formulas --------
center = np.linalg.norm(field(loop, np.zeros(3), params))
print(f"field at center   : {center:.6f}  (analytic 2*pi = {2 * np.pi:.6f})")
for z in (0.5, 1.0, 2.0):
    sampled = np.linalg.norm(field(loop, np.array([0.0, 0.0, z]), params))
    exact = 2 * np.pi / (1.0 + z * z) ** 1.5
    print(f"field on axis z={z}: {sampled:.6f}  (analytic {exact:.6f})")

# --- trace field lines by stepping along the local direction ------------
# Lines seeded above the plane funnel through the opening: that funnel is
# exactly what guides an insertion.
step = 0.02
seeds = [np.array([x, 0.0, 1.5]) for x in (-0.6, -0.2, 0.2, 0.6)]
with open("field_lines.csv", "w", encoding="utf-8") as fh:
    fh.write("line,step,x,y,z\n")
    for li, x in enumerate(seeds):
        x = x.copy()
        for si in range(400):
            fh.write(f"{li},{si},{x[0]:.6g},{x[1]:.6g},{x[2]:.6g}\n")
            b = field(loop, x, params)
            x = x + step * b / np.linalg.norm(b)
            if np.linalg.norm(x) > 3.0:
                break
print("wrote field_lines.csv (4 traced lines)")
