"""Scalar controls: piecewise-constant densities with finitely many atoms.

A :class:`Control` on ``[0, T]`` is the signed measure

    u(t) dt + sum_j alpha_j delta_{tau_j}

with ``u`` constant on each left-closed, right-open piece
``[t_{i-1}, t_i)``. Atom times lie in ``(0, T]``. Without atoms the control
is a bounded-variation function; with atoms it is a finite Radon measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Control",
    "constant",
    "total_variation",
    "signed_integral",
    "total_mass",
    "density_part",
    "concatenate",
    "sample_bv",
    "mollify_atom",
    "random_control_family",
    "control_to_json",
    "control_from_json",
]


@dataclass(frozen=True)
class Control:
    """Piecewise-constant density plus atoms on ``[0, horizon]``.

    Attributes
    ----------
    horizon : float
        Final time ``T > 0``.
    breakpoints : tuple of float
        ``0 = t_0 < t_1 < ... < t_m = T``.
    values : tuple of float
        Density value ``u_i`` on ``[t_{i-1}, t_i)``; length ``m``.
    atoms : tuple of (time, mass)
        Point masses at strictly increasing times in ``(0, T]``.
    """

    horizon: float
    breakpoints: tuple
    values: tuple
    atoms: tuple = field(default=())

    def __post_init__(self):
        T = float(self.horizon)
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        atoms = tuple((float(t), float(a)) for t, a in self.atoms)
        if not (math.isfinite(T) and T > 0):
            raise ValueError("horizon must be a positive finite real")
        if len(bp) < 2 or len(vals) != len(bp) - 1:
            raise ValueError("need m >= 1 values and m + 1 breakpoints")
        if bp[0] != 0.0 or bp[-1] != T:
            raise ValueError("breakpoints must start at 0 and end at the horizon")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("control values must be finite")
        for t, a in atoms:
            if not (0.0 < t <= T):
                raise ValueError(f"atom time {t} outside (0, {T}]")
            if not math.isfinite(a):
                raise ValueError("atom masses must be finite")
        if any(t2 <= t1 for (t1, _), (t2, _) in zip(atoms, atoms[1:])):
            raise ValueError("atom times must be strictly increasing")
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "atoms", atoms)

    @property
    def pieces(self) -> int:
        return len(self.values)

    @property
    def has_atoms(self) -> bool:
        return bool(self.atoms)

    def value_at(self, t: float) -> float:
        """Density value at ``t`` (right-continuous; the last value at ``t = T``)."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(i, self.pieces - 1)]

    def sup_norm(self) -> float:
        """``||u||_inf`` of the density part."""
        return max(abs(v) for v in self.values)

    def event_times(self) -> list:
        """Breakpoints and atom times, sorted and without duplicates."""
        return sorted(set(self.breakpoints) | {t for t, _ in self.atoms})


def constant(value: float, horizon: float) -> Control:
    return Control(horizon, (0.0, horizon), (value,))


def total_variation(c: Control) -> float:
    """Total variation of the density; attained at the breakpoints.

    Atoms are not part of a BV function: split them off first with
    :func:`density_part`.
    """
    if c.has_atoms:
        raise ValueError("total_variation is defined for atom-free controls; "
                         "use density_part() to split the control")
    return float(np.sum(np.abs(np.diff(c.values))))


def signed_integral(c: Control, t: Optional[float] = None) -> float:
    """``int_0^t u + sum_{tau_j <= t} alpha_j``; ``t`` defaults to the horizon."""
    if t is None:
        t = c.horizon
    if not 0.0 <= t <= c.horizon:
        raise ValueError(f"time {t} outside [0, {c.horizon}]")
    bp = np.asarray(c.breakpoints)
    lengths = np.clip(t - bp[:-1], 0.0, np.diff(bp))
    dens = float(np.dot(lengths, c.values))
    return dens + sum(a for tau, a in c.atoms if tau <= t)


def absolute_integral(c: Control, t: Optional[float] = None) -> float:
    """``|u|([0, t])``: ``int_0^t |u| + sum_{tau_j <= t} |alpha_j|``."""
    if t is None:
        t = c.horizon
    if not 0.0 <= t <= c.horizon:
        raise ValueError(f"time {t} outside [0, {c.horizon}]")
    bp = np.asarray(c.breakpoints)
    lengths = np.clip(t - bp[:-1], 0.0, np.diff(bp))
    dens = float(np.dot(lengths, np.abs(c.values)))
    return dens + sum(abs(a) for tau, a in c.atoms if tau <= t)


def total_mass(c: Control) -> float:
    """Total variation measure ``|u|([0, T])`` of density plus atoms."""
    return absolute_integral(c, c.horizon)


def density_part(c: Control) -> Control:
    """The same control without its atoms."""
    return Control(c.horizon, c.breakpoints, c.values)


def concatenate(first: Control, second: Control) -> Control:
    """Run ``first`` on ``[0, T1]`` and then ``second`` shifted to ``[T1, T1 + T2]``."""
    T1 = first.horizon
    bp = first.breakpoints + tuple(T1 + t for t in second.breakpoints[1:])
    atoms = first.atoms + tuple((T1 + t, a) for t, a in second.atoms)
    return Control(T1 + second.horizon, bp, first.values + second.values, atoms)


def sample_bv(u: Callable[[float], float], partition: Sequence[float]) -> Control:
    """Piecewise-constant representative taking ``u(t_{i-1})`` on ``[t_{i-1}, t_i)``.

    Its total variation never exceeds that of ``u``.
    """
    p = np.asarray(partition, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("partition needs at least two points")
    if np.any(np.diff(p) <= 0):
        raise ValueError("partition must be strictly increasing")
    if p[0] != 0.0:
        raise ValueError("partition must start at 0")
    values = [float(u(t)) for t in p[:-1]]
    return Control(float(p[-1]), tuple(p), tuple(values))


def mollify_atom(atom: tuple, width: float, horizon: Optional[float] = None) -> Control:
    """Pulse of height ``mass / width`` on ``[tau - width, tau)``.

    ``horizon`` defaults to the atom time. The pulse has total mass
    ``|mass|`` for every width.
    """
    tau, mass = float(atom[0]), float(atom[1])
    T = tau if horizon is None else float(horizon)
    if width <= 0:
        raise ValueError("pulse width must be positive")
    start = tau - width
    if start < 0 or tau > T:
        raise ValueError(f"pulse [{start}, {tau}) leaves [0, {T}]")
    bp = [start, tau] if start > 0 else [tau]
    vals = [0.0, mass / width] if start > 0 else [mass / width]
    if tau < T:
        bp.append(T)
        vals.append(0.0)
    return Control(T, (0.0, *bp), tuple(vals))


def random_control_family(seed: int, tv_budget: float, horizon: float, pieces: int,
                          count: int, amplitude_cap: Optional[float] = None) -> list:
    """Seeded family of piecewise-constant controls.

    Each member has ``pieces`` pieces with uniformly drawn interior
    breakpoints. Its initial value and increments are drawn jointly and
    rescaled so that ``|u_1| + sum |u_i - u_{i-1}| <= tv_budget``, hence both
    ``total_variation <= tv_budget`` and ``total_mass <= tv_budget * horizon``.
    ``amplitude_cap`` clips the values, which can only lower both.

    Member ``i`` depends only on ``(seed, i)``.
    """
    if pieces < 1 or count < 1:
        raise ValueError("pieces and count must be at least 1")
    if tv_budget < 0:
        raise ValueError("tv_budget must be non-negative")
    family = []
    for child in np.random.SeedSequence(seed).spawn(count):
        rng = np.random.default_rng(child)
        interior = np.sort(rng.uniform(0.0, horizon, size=pieces - 1))
        bp = np.concatenate([[0.0], interior, [horizon]])
        if np.any(np.diff(bp) <= 0):
            bp = np.linspace(0.0, horizon, pieces + 1)
        raw = rng.standard_normal(pieces)
        budget = rng.uniform(0.0, 1.0) * tv_budget
        scale = np.sum(np.abs(raw))
        raw = raw * (budget / scale) if scale > budget else raw
        if tv_budget == 0:
            raw = np.zeros(pieces)
        values = np.cumsum(raw)
        if amplitude_cap is not None:
            values = np.clip(values, -amplitude_cap, amplitude_cap)
        bp[-1] = horizon
        family.append(Control(horizon, tuple(bp), tuple(values)))
    return family


def control_to_dict(c: Control) -> dict:
    return {"horizon": c.horizon, "breakpoints": list(c.breakpoints),
            "values": list(c.values), "atoms": [list(a) for a in c.atoms]}


def control_from_dict(d: dict) -> Control:
    return Control(d["horizon"], tuple(d["breakpoints"]), tuple(d["values"]),
                   tuple(tuple(a) for a in d.get("atoms", ())))


def control_to_json(c: Control, indent: Optional[int] = None) -> str:
    return json.dumps(control_to_dict(c), indent=indent)


def control_from_json(text: str) -> Control:
    return control_from_dict(json.loads(text))
