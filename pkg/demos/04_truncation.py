"""
Choosing a truncation order
===========================

Compares truncated flows with a 64-mode reference over a seeded control
family of total mass at most L, then rechecks the chosen order on a fresh
family.
"""

import time

from galerkin_bilinear import (FamilySpec, Potential, build_box_model, eigenstate,
                               find_truncation, heldout_validation, rebuild)

start = time.perf_counter()
reference = build_box_model(64, None, Potential.cosine())
states = {"phi1": eigenstate(64, 1), "phi2": eigenstate(64, 2)}

report = find_truncation(reference, eps=1e-3, mass_budget=5.0, horizon=1.0, states=states,
                         s=0.0, family=FamilySpec(seed=7, count=12), dims=(4, 8, 16, 32),
                         doubled_reference=rebuild(reference, 128))
for n in report.tested_dims:
    print(f"N={n:3d}  worst error {report.worst_error[n]:.3e}")
print("selected N:", report.selected_N)
print("change under reference doubling:", report.reference_change)

held = heldout_validation(report, reference, fresh_seed=12345, count=24)
print("held-out worst error:", held.worst_error, "passed:", held.passed)
print("took %.1f s" % (time.perf_counter() - start))
