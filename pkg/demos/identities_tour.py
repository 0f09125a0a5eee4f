"""Walk through the kinematic identities on a trigonometric placement.

Run with ``python3 demos/identities_tour.py``.
"""

import numpy as np

from gradpd import fields
from gradpd.identities import enumerate_trinomials, report_passed, verification_suite

pf = fields.trigonometric(
    [[0.08, -0.05, 0.03], [-0.04, 0.06, 0.05], [0.03, 0.02, -0.07]],
    [[1.3, 0.7, -0.9], [-0.6, 1.1, 0.8], [0.5, -0.4, 1.4]],
    [0.3, 1.1, -0.7],
)

for pq in [(1, 2), (2, 2), (1, 3), (2, 3), (3, 3)]:
    print(f"trinomial family {pq}: {len(enumerate_trinomials(*pq))} members")

X = np.array([0.2, -0.3, 0.4])
state = fields.deformation_state(pf, X)
print("\nGreen tensor C at", X)
print(np.array2string(state.C, precision=6))

print("\nidentity checks:")
for r in verification_suite(pf, X):
    flag = "ok  " if report_passed(r) else "FAIL"
    print(f"  {flag} {r.name:28s} abs {r.abs_residual:.1e}  rel {r.rel_residual:.1e}")
