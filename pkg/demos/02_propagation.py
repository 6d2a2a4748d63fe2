"""
Propagating under piecewise-constant and atomic controls
========================================================
"""

import numpy as np

from galerkin_bilinear import (Control, Potential, build_box_model, eigenstate, mollify_atom,
                               ode_oracle, propagate)

model = build_box_model(8, None, Potential.cosine())
psi0 = eigenstate(8, 1)

# bang-bang control with an impulse at t = 0.6
u = Control(1.0, (0.0, 0.25, 0.5, 0.75, 1.0), (2.0, -2.0, 2.0, -2.0), atoms=((0.6, 1.0),))
traj = propagate(model, u, 0.0, 1.0, psi0, record=11, norms=(2,))
print("recorded times:", np.round(traj.times, 3))
print("max |norm - 1|:", np.max(np.abs(traj.norm_log["plain"] - 1)))
print("population of each mode at T:", np.round(np.abs(traj.final) ** 2, 4))

# the same density without the atom, against an independent RK4 integration
plain = Control(1.0, u.breakpoints, u.values)
exact = propagate(model, plain, 0.0, 1.0, psi0).final
rk4 = ode_oracle(model, plain, psi0, 1e-4)
print("\nexponential vs RK4:", np.linalg.norm(exact - rk4))

# a narrow pulse of unit mass approaches the jump
atom = Control(1.0, (0.0, 1.0), (0.0,), atoms=((0.5, 1.0),))
target = propagate(model, atom, 0.0, 1.0, psi0).final
for h in (0.1, 0.05, 0.025, 0.0125):
    err = np.linalg.norm(propagate(model, mollify_atom((0.5, 1.0), h, 1.0), 0.0, 1.0, psi0).final - target)
    print(f"pulse width {h:7.4f}: error {err:.5f}")
