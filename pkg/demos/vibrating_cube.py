"""Free vibration of a unit cube and the approach to the local limit.

Run with ``python3 demos/vibrating_cube.py`` (about half a minute).
"""

import numpy as np

from gradpd import fields
from gradpd.interaction import Kernel
from gradpd.lattice import build_lattice
from gradpd.simulate import BodyForce, horizon_convergence_study, run, stable_dt

unit = fields.Box((0, 0, 0), (1, 1, 1))
kernel = Kernel("micro-elastic", c=1.0, delta=0.3)
system = build_lattice(unit, h=0.1, delta=0.3, mu=1.0)
print(f"{system.n} particles, up to {system.mask.sum(axis=1).max()} neighbors each")

pert = fields.trigonometric([[0.01, 0.005, -0.004]], [[3.0, -2.0, 1.5]], [0.2], box=unit)
vel = fields.TrigonometricMap([[0.004, -0.003, 0.002]], [[2.0, 1.0, -1.5]], [0.5], with_identity=False)
system = system.with_placement(pert).with_state(vel=vel.value(system.ref))

dt = stable_dt(system, kernel)
_, trace = run(system, kernel, BodyForce.zero(), dt, 1000, every=100)
E0 = trace.records[0].total
print(f"dt = {dt:.4f}")
print(" step      kinetic    potential   rel. energy change")
for r in trace.records:
    print(f"{r.step:5d}  {r.kinetic:.5e}  {r.potential:.5e}  {(r.total - E0) / E0:+.2e}")
print("max |momentum|:", np.abs(trace.momentum).max())

# shrinking the horizon at fixed macroscopic stiffness
trig = fields.trigonometric(
    [[0.08, -0.05, 0.03], [-0.04, 0.06, 0.05], [0.03, 0.02, -0.07]],
    [[1.3, 0.7, -0.9], [-0.6, 1.1, 0.8], [0.5, -0.4, 1.4]],
    [0.3, 1.1, -0.7],
)
print("\nhorizon    error vs local limit   order")
for row in horizon_convergence_study(trig, kernel, [0.1, 0.05, 0.025]):
    print(f"{row.horizon:7.3f}    {row.max_error:.3e}            {row.est_order:.2f}")
