"""Empirical truncation-order selection for the Galerkin approximation.

A large reference truncation stands in for the infinite-dimensional flow.
For a family of controls with total mass at most ``L`` and a few initial
states, the harness measures

    sup_t || X_ref(t, 0) psi - lift(X_N(t, 0) pi_N psi) ||_{s/2}

for every tested order ``N`` and reports the smallest ``N`` whose worst
error is below ``eps``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from ._fmt import rows_to_csv
from .controls import Control, concatenate, constant, random_control_family, total_mass
from .propagator import GridSpec, _evolve, record_times
from .spectral_model import SpectralModel, compress, lift, project, sobolev_norm

__all__ = [
    "FamilySpec",
    "ConvergenceReport",
    "HeldoutResult",
    "build_family",
    "galerkin_error",
    "find_truncation",
    "heldout_validation",
    "post_horizon_drift",
]

DEFAULT_K = 2.0
# Held-out validation passes below this multiple of eps.
HELDOUT_SLACK = 1.5
# Reference doubling may move errors by at most this fraction of eps.
REFERENCE_FRACTION = 0.1
# Adversarial members use this fraction of the mass budget.
BUDGET_FRACTION = 0.99


@dataclass(frozen=True)
class FamilySpec:
    """Seeded control family under a mass budget.

    ``count`` random members are drawn; every odd-numbered one also carries
    ``atoms`` point masses. With ``adversarial`` the family also contains
    constant controls ``+-0.99 L / T``, a bang-bang control, and single
    large atoms at ``T/2`` and ``T``.
    """

    seed: int
    count: int = 12
    pieces: int = 8
    atoms: int = 2
    adversarial: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "FamilySpec":
        return cls(**{k: d[k] for k in ("seed", "count", "pieces", "atoms", "adversarial") if k in d})


def _random_member(child: np.random.SeedSequence, spec: FamilySpec, mass_budget, horizon,
                   with_atoms: bool) -> Control:
    rng = np.random.default_rng(child)
    base = random_control_family(int(child.generate_state(1)[0]), 1.0, horizon,
                                 spec.pieces, 1)[0]
    atoms = ()
    if with_atoms and spec.atoms > 0:
        times = np.unique(rng.uniform(0.0, horizon, size=spec.atoms))
        times = times[times > 0]
        atoms = tuple((float(t), float(a)) for t, a in zip(times, rng.standard_normal(times.size)))
    raw = Control(horizon, base.breakpoints, base.values, atoms)
    mass = total_mass(raw)
    if mass == 0:
        return raw
    scale = rng.uniform(0.3, BUDGET_FRACTION) * mass_budget / mass
    return Control(horizon, raw.breakpoints, tuple(v * scale for v in raw.values),
                   tuple((t, a * scale) for t, a in raw.atoms))


def build_family(spec: FamilySpec, mass_budget: float, horizon: float) -> dict:
    """Members keyed by control id; the result depends only on the arguments."""
    if mass_budget < 0:
        raise ValueError("mass budget must be non-negative")
    family = {}
    if mass_budget == 0:
        family["zero"] = constant(0.0, horizon)
        return family
    children = np.random.SeedSequence(spec.seed).spawn(spec.count)
    for i, child in enumerate(children):
        family[f"rand-{i:03d}"] = _random_member(child, spec, mass_budget, horizon, i % 2 == 1)
    if spec.adversarial:
        amp = BUDGET_FRACTION * mass_budget / horizon
        big = BUDGET_FRACTION * mass_budget
        bp = tuple(np.linspace(0.0, horizon, spec.pieces + 1))
        family["adv-const-plus"] = constant(amp, horizon)
        family["adv-const-minus"] = constant(-amp, horizon)
        family["adv-bang-bang"] = Control(horizon, bp, tuple(amp * (-1) ** i for i in range(spec.pieces)))
        family["adv-atom-mid"] = Control(horizon, (0.0, horizon), (0.0,), ((0.5 * horizon, big),))
        family["adv-atom-end"] = Control(horizon, (0.0, horizon), (0.0,), ((horizon, -big),))
    return family


@dataclass
class ConvergenceReport:
    """Galerkin error table and the selected truncation order.

    ``errors`` maps ``(dim, control_id, state_id)`` to the sup-over-time
    error; ``worst_error`` maps each dim to the maximum of its entries.
    """

    reference_dim: int
    tested_dims: list
    errors: dict
    worst_error: dict
    selected_N: Optional[int]
    parameters: dict
    family: Optional[FamilySpec] = None
    states: dict = field(default_factory=dict, repr=False)
    reference_change: Optional[float] = None
    converged: Optional[bool] = None

    @property
    def eps(self) -> float:
        return self.parameters["eps"]

    def to_csv(self) -> str:
        rows = [[dim, cid, sid, float(err)] for (dim, cid, sid), err in self.errors.items()]
        return rows_to_csv(["dim", "control_id", "state_id", "sup_error"], rows)

    def to_dict(self) -> dict:
        return {
            "reference_dim": self.reference_dim,
            "tested_dims": list(self.tested_dims),
            "worst_error": {str(d): float(e) for d, e in self.worst_error.items()},
            "selected_N": self.selected_N,
            "parameters": dict(self.parameters),
            "family": None if self.family is None else self.family.to_dict(),
            "reference_change": self.reference_change,
            "converged": self.converged,
            "errors": [{"dim": d, "control_id": c, "state_id": s, "sup_error": float(e)}
                       for (d, c, s), e in self.errors.items()],
        }

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class HeldoutResult:
    passed: bool
    worst_error: float
    threshold: float
    selected_N: int
    count: int


def _check_orders(reference: SpectralModel, n: int, s: float, k: float):
    if not 1 <= n < reference.dim:
        raise ValueError(f"tested order {n} must lie in [1, {reference.dim - 1}]")
    if s < 0:
        raise ValueError("s must be non-negative")
    if s >= k:
        raise ValueError(f"error norm order s={s} must be below the coupling order k={k}")


def _sup_errors(reference: SpectralModel, n: int, c: Control, states: np.ndarray,
                s: float, grid: GridSpec) -> np.ndarray:
    """Sup-over-time errors for the columns of ``states`` (shape ``(ref_dim, count)``)."""
    times = record_times(c, 0.0, c.horizon, grid)
    full = _evolve(reference, c, times, states, keep=True)
    low = _evolve(compress(reference, n), c, times, states[:n], keep=True)
    diff = full.copy()
    diff[:, :n, :] -= low
    weights = reference.eigenvalues ** (s / 2)
    norms = np.linalg.norm(weights[None, :, None] * diff, axis=1)
    return norms.max(axis=0)


def galerkin_error(reference: SpectralModel, n: int, c: Control, state, s: float = 0.0,
                   grid: GridSpec = 51, k: float = DEFAULT_K) -> float:
    """Sup over the recorded times of ``||X_ref psi - lift(X_n pi_n psi)||_{s/2}``.

    ``k`` is the coupling order the error norm must stay below.
    """
    _check_orders(reference, n, s, k)
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (reference.dim,):
        raise ValueError("state must be given at the reference dimension")
    return float(_sup_errors(reference, n, c, psi[:, None], s, grid)[0])


def _resolve_family(family, mass_budget, horizon):
    if isinstance(family, FamilySpec):
        return build_family(family, mass_budget, horizon), family
    if isinstance(family, Mapping):
        return dict(family), None
    return {f"c{i:03d}": c for i, c in enumerate(family)}, None


def _resolve_states(states, dim):
    if isinstance(states, Mapping):
        items = list(states.items())
    else:
        items = [(f"psi{i}", x) for i, x in enumerate(states)]
    out = {}
    for sid, x in items:
        x = np.asarray(x, dtype=complex)
        if x.shape != (dim,):
            raise ValueError(f"state {sid} must have length {dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"state {sid} has non-finite entries")
        out[sid] = x
    if not out:
        raise ValueError("at least one state is required")
    return out


def _error_table(reference, dims, family, states, s, grid):
    matrix = np.column_stack(list(states.values()))
    sids = list(states)
    table = {}
    for n in dims:
        for cid, c in family.items():
            errs = _sup_errors(reference, n, c, matrix, s, grid)
            for sid, e in zip(sids, errs):
                table[(n, cid, sid)] = float(e)
    return table


def find_truncation(reference: SpectralModel, eps: float, mass_budget: float, horizon: float,
                    states, s: float, family, dims: Sequence[int], k: float = DEFAULT_K,
                    grid: GridSpec = 51,
                    doubled_reference: Optional[SpectralModel] = None) -> ConvergenceReport:
    """Evaluate the Galerkin error over ``dims x family x states`` and pick ``N``.

    Parameters
    ----------
    family : FamilySpec, mapping of id to Control, or sequence of Control
        Every member must have total mass at most ``mass_budget`` and the
        given horizon.
    doubled_reference : SpectralModel, optional
        A reference of larger order (typically twice ``reference.dim``). The
        whole table is recomputed with it; ``converged`` records whether no
        error moved by ``0.1 * eps`` or more.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    dims = [int(d) for d in dims]
    if not dims or any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be a non-empty increasing sequence")
    for n in dims:
        _check_orders(reference, n, s, k)
    members, spec = _resolve_family(family, mass_budget, horizon)
    for cid, c in members.items():
        if not math.isclose(c.horizon, horizon):
            raise ValueError(f"control {cid} has horizon {c.horizon}, expected {horizon}")
        if total_mass(c) > mass_budget:
            raise ValueError(f"control {cid} has total mass {total_mass(c):.6g} "
                             f"above the budget {mass_budget}")
    psis = _resolve_states(states, reference.dim)
    table = _error_table(reference, dims, members, psis, s, grid)
    worst = {n: max(e for (d, _, _), e in table.items() if d == n) for n in dims}
    selected = next((n for n in dims if worst[n] < eps), None)
    params = {"eps": float(eps), "L": float(mass_budget), "T": float(horizon), "s": float(s),
              "k": float(k), "grid": grid if not isinstance(grid, (list, tuple, np.ndarray)) else list(grid),
              "seed": None if spec is None else spec.seed}
    report = ConvergenceReport(reference.dim, dims, table, worst, selected, params,
                               family=spec, states=psis)
    if doubled_reference is not None:
        if doubled_reference.dim <= reference.dim:
            raise ValueError("the doubled reference must be larger than the reference")
        lifted = {sid: lift(x, doubled_reference.dim) for sid, x in psis.items()}
        table2 = _error_table(doubled_reference, dims, members, lifted, s, grid)
        change = max(abs(table[key] - table2[key]) for key in table)
        report.reference_change = float(change)
        report.converged = bool(change < REFERENCE_FRACTION * eps)
    return report


def heldout_validation(report: ConvergenceReport, reference: SpectralModel, fresh_seed: int,
                       count: Optional[int] = None,
                       mass_budget: Optional[float] = None) -> HeldoutResult:
    """Recheck the selected order on a fresh family drawn under the same budget.

    Passes when the worst error stays below ``1.5 * eps``. A held-out budget
    ``mass_budget`` above the report's ``L`` is rejected.
    """
    if report.selected_N is None:
        raise ValueError("the report has no selected truncation order")
    if report.family is None:
        raise ValueError("held-out validation needs a report built from a FamilySpec")
    L = report.parameters["L"]
    if mass_budget is None:
        mass_budget = L
    if mass_budget > L:
        raise ValueError(f"held-out mass budget {mass_budget} exceeds the selection budget {L}")
    spec = replace(report.family, seed=fresh_seed,
                   count=report.family.count if count is None else count)
    members = build_family(spec, mass_budget, report.parameters["T"])
    table = _error_table(reference, [report.selected_N], members, report.states,
                         report.parameters["s"], report.parameters["grid"])
    worst = max(table.values())
    threshold = HELDOUT_SLACK * report.eps
    return HeldoutResult(bool(worst < threshold), float(worst), threshold,
                         report.selected_N, len(members))


def post_horizon_drift(reference: SpectralModel, n: int, c: Control, state, s: float = 0.0,
                       extension: float = 1.0, samples: int = 11,
                       k: float = DEFAULT_K) -> float:
    """Largest change of the Galerkin error after the control has switched off.

    The control is extended by zero on ``[T, T + extension]``; both flows are
    then diagonal, so the error in ``||.||_{s/2}`` should stay at its value at
    ``T``.
    """
    _check_orders(reference, n, s, k)
    psi = np.asarray(state, dtype=complex)
    ext = concatenate(c, constant(0.0, extension))
    grid = np.linspace(c.horizon, ext.horizon, samples)
    times = record_times(ext, 0.0, ext.horizon, grid)
    full = _evolve(reference, ext, times, psi, keep=True)
    low = _evolve(compress(reference, n), ext, times, project(psi, n), keep=True)
    errs = []
    for t, x, y in zip(times, full, low):
        if t >= c.horizon:
            errs.append(sobolev_norm(reference, x - lift(y, reference.dim), s))
    errs = np.array(errs)
    return float(np.max(np.abs(errs - errs[0])))
