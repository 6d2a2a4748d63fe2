"""Propagators of the Galerkin system ``x' = (A_N + u(t) B_N) x``.

For a piecewise-constant control the propagator is an ordered product of
matrix exponentials ``exp(dt (A_N + u_i B_N))``; an atom of mass ``alpha``
contributes the factor ``exp(alpha B_N)``. Pieces are left-closed and
right-open, and an atom at ``tau`` acts after the density has been applied
up to ``tau`` (cadlag convention). ``X(t, s)`` applies the atoms with
``s < tau <= t``.

:func:`ode_oracle` is a classical fixed-step RK4 integrator kept as an
independent check on the exponential products.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from ._fmt import fmt_float
from .controls import Control
from .spectral_model import SpectralModel, sobolev_norm

__all__ = [
    "Trajectory",
    "step",
    "jump",
    "propagate",
    "propagator_matrix",
    "record_times",
    "ode_oracle",
    "trajectory_to_csv",
]

GridSpec = Union[None, int, Sequence[float]]
SNAP_TOL = 1e-12


@dataclass
class Trajectory:
    """States recorded along a propagation.

    ``states[i]`` is the state at ``times[i]`` after all atoms at that time.
    ``norm_log`` maps ``"plain"`` and ``"k=<k>"`` to per-time norm arrays.
    """

    times: np.ndarray
    states: np.ndarray
    norm_log: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def _expm(m: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(m)


def step(model: SpectralModel, u_value: float, dt: float, state) -> np.ndarray:
    """Exact flow over ``dt`` with the control frozen at ``u_value``."""
    psi = np.asarray(state, dtype=complex)
    _check_finite(np.array([u_value, dt], dtype=float), psi)
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if psi.shape[0] != model.dim:
        raise ValueError("state length does not match model dim")
    if dt == 0:
        return psi.copy()
    return _expm(dt * model.generator(u_value)) @ psi


def jump(model: SpectralModel, mass: float, state) -> np.ndarray:
    """Apply the atom factor ``exp(mass B)``."""
    psi = np.asarray(state, dtype=complex)
    _check_finite(np.array([mass], dtype=float), psi)
    if psi.shape[0] != model.dim:
        raise ValueError("state length does not match model dim")
    if mass == 0:
        return psi.copy()
    return _expm(mass * model.b_matrix) @ psi


def record_times(c: Control, s: float, t: float, record: GridSpec = None) -> np.ndarray:
    """Union of ``{s, t}``, the requested grid, and breakpoints/atom times in ``[s, t]``.

    ``record`` is either ``None``, an integer number of equally spaced points
    on ``[s, t]`` (endpoints included), or explicit times. Grid points within
    ``SNAP_TOL * max(1, t)`` of an event time are merged into it.
    """
    if s > t:
        raise ValueError(f"s={s} exceeds t={t}")
    if s < 0 or t > c.horizon:
        raise ValueError(f"[{s}, {t}] not inside [0, {c.horizon}]")
    events = {float(s), float(t)}
    events.update(b for b in c.breakpoints if s <= b <= t)
    events.update(tau for tau, _ in c.atoms if s <= tau <= t)
    pts = set(events)
    if record is not None:
        if isinstance(record, (int, np.integer)):
            if record < 2:
                raise ValueError("an integer grid needs at least 2 points")
            grid = np.linspace(s, t, int(record))
        else:
            grid = np.asarray(record, dtype=float)
            if np.any(grid < s) or np.any(grid > t):
                raise ValueError("recording times must lie in [s, t]")
        # grid points within roundoff of an event collapse onto the event
        ev = np.array(sorted(events))
        tol = SNAP_TOL * max(1.0, abs(t))
        for g in grid:
            j = np.searchsorted(ev, g)
            near = ev[max(j - 1, 0):j + 1]
            if not np.any(np.abs(near - g) <= tol):
                pts.add(float(g))
    return np.array(sorted(pts))


def _evolve(model: SpectralModel, c: Control, times: np.ndarray, y: np.ndarray,
            keep: bool):
    """Advance ``y`` (vector or matrix) through ``times``; optionally keep every stage."""
    pieces = np.asarray(c.breakpoints)
    atoms = dict(c.atoms)
    cache = {}
    out = [y.copy()] if keep else None
    for a, b in zip(times[:-1], times[1:]):
        # the interval [a, b) lies inside a single density piece
        cursor = a
        while cursor < b:
            i = int(np.searchsorted(pieces, cursor, side="right")) - 1
            i = min(i, c.pieces - 1)
            end = min(b, pieces[i + 1])
            dt = end - cursor
            u = c.values[i]
            key = (u, dt)
            prop = cache.get(key)
            if prop is None:
                prop = _expm(dt * model.generator(u))
                cache[key] = prop
            y = prop @ y
            cursor = end
        mass = atoms.get(b)
        if mass:
            key = ("atom", mass)
            prop = cache.get(key)
            if prop is None:
                prop = _expm(mass * model.b_matrix)
                cache[key] = prop
            y = prop @ y
        if keep:
            out.append(y)
    return (np.array(out) if keep else y)


def propagate(model: SpectralModel, c: Control, s: float, t: float, state,
              record: GridSpec = None, norms: Sequence[float] = ()) -> Trajectory:
    """Propagate ``state`` from ``s`` to ``t`` under control ``c``.

    Parameters
    ----------
    record : None, int or sequence of float
        Extra recording times, see :func:`record_times`.
    norms : sequence of float
        Sobolev orders ``k`` whose norms ``||psi||_{k/2}`` are logged.
    """
    psi = np.asarray(state, dtype=complex)
    _check_finite(psi)
    if psi.shape != (model.dim,):
        raise ValueError("state length does not match model dim")
    times = record_times(c, s, t, record)
    states = _evolve(model, c, times, psi, keep=True)
    log = {"plain": np.linalg.norm(states, axis=1)}
    for k in norms:
        log[f"k={fmt_float(k)}"] = np.array([sobolev_norm(model, x, k) for x in states])
    return Trajectory(times=times, states=states, norm_log=log)


def propagator_matrix(model: SpectralModel, c: Control, s: float, t: float) -> np.ndarray:
    """Matrix of ``X(t, s)``; the identity when ``t == s``."""
    times = record_times(c, s, t)
    eye = np.eye(model.dim, dtype=complex)
    if t == s:
        return eye
    return _evolve(model, c, times, eye, keep=False)


def ode_oracle(model: SpectralModel, c: Control, state, h: float) -> np.ndarray:
    """Classical RK4 with fixed step ``h`` from ``0`` to ``c.horizon``.

    Desk-scale reference only (``dim <= 16``). ``h`` must divide every
    density piece.
    """
    if c.has_atoms:
        raise ValueError("the RK4 oracle does not handle atoms")
    if model.dim > 16:
        raise ValueError("the RK4 oracle is limited to dim <= 16")
    if h <= 0:
        raise ValueError("step must be positive")
    y = np.array(state, dtype=complex)
    if y.shape != (model.dim,):
        raise ValueError("state length does not match model dim")
    bp = c.breakpoints
    for i, u in enumerate(c.values):
        length = bp[i + 1] - bp[i]
        n = int(round(length / h))
        if n < 1 or abs(n * h - length) > 1e-9 * max(1.0, length):
            raise ValueError(f"step {h} does not divide piece of length {length}")
        m = model.generator(u)
        for _ in range(n):
            k1 = m @ y
            k2 = m @ (y + 0.5 * h * k1)
            k3 = m @ (y + 0.5 * h * k2)
            k4 = m @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV with ``time``, ``re_j``/``im_j`` per coefficient, then the norm columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    dim = traj.states.shape[1]
    header = ["time"]
    for j in range(1, dim + 1):
        header += [f"re_{j}", f"im_{j}"]
    norm_keys = list(traj.norm_log)
    header += [f"norm_{key}" for key in norm_keys]
    writer.writerow(header)
    for i, t in enumerate(traj.times):
        row = [fmt_float(t)]
        for z in traj.states[i]:
            row += [fmt_float(z.real), fmt_float(z.imag)]
        row += [fmt_float(traj.norm_log[key][i]) for key in norm_keys]
        writer.writerow(row)
    return buf.getvalue()
