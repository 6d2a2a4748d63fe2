"""Finite-dimensional spectral instantiations of the pair (A, B).

The drift ``A = -i(Delta + V)`` and the control potential ``B = -i W`` are
represented in an orthonormal eigenbasis ``Phi`` of ``A``, so that
``A phi_k = i lambda_k phi_k`` and ``B`` is stored as the compressed matrix
``-i <phi_j, W phi_k>``.

Two model geometries are available:

``dirichlet_box``
    The interval ``(0, pi)`` with Dirichlet conditions, reference basis
    ``sqrt(2/pi) sin(n x)``, bare spectrum ``n**2``.
``flat_torus``
    The circle ``(0, 2 pi)``, reference basis ``exp(i m x) / sqrt(2 pi)`` in
    the order ``m = 0, 1, -1, 2, -2, ...``, spectrum ``m**2`` shifted by
    ``+1`` so that ``A`` is invertible.

State vectors are plain complex numpy arrays holding the coefficients
``<phi_j, psi>``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import AccuracyError, ModelDiagnosticsError

__all__ = [
    "Potential",
    "SpectralModel",
    "build_box_model",
    "build_torus_model",
    "rebuild",
    "compress",
    "project",
    "lift",
    "eigenstate",
    "sobolev_norm",
    "weighted_similarity",
    "evaluate_state",
    "model_to_json",
    "model_from_json",
]

GEOMETRIES = ("dirichlet_box", "flat_torus")
PROVENANCES = ("analytic", "numerically_diagonalized")

# Gauss-Legendre order used on each quadrature panel.
PANEL_ORDER = 16
# Absolute tolerance of the quadrature doubling self-check.
QUADRATURE_TOL = 1e-10
# Minimum spacing between numerical eigenvalues.
DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class Potential:
    """Closed-form real potential on the model interval.

    ``kind="trig"`` evaluates ``sum_j cos[j] cos(j x) + sin[j] sin(j x)``
    (``j`` starting at 0); ``kind="polynomial"`` evaluates
    ``sum_j coefficients[j] x**j``.
    """

    kind: str = "trig"
    cos: tuple = ()
    sin: tuple = ()
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in ("trig", "polynomial"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        for name in ("cos", "sin", "coefficients"):
            raw = getattr(self, name)
            vals = []
            for c in raw:
                if isinstance(c, complex) or np.iscomplexobj(c):
                    if np.imag(c) != 0:
                        raise ValueError(f"potential coefficient {c!r} is not real")
                    c = np.real(c)
                c = float(c)
                if not math.isfinite(c):
                    raise ValueError("potential coefficients must be finite")
                vals.append(c)
            object.__setattr__(self, name, tuple(vals))
        if self.kind == "trig" and self.coefficients:
            raise ValueError("trig potentials take cos/sin coefficients only")
        if self.kind == "polynomial" and (self.cos or self.sin):
            raise ValueError("polynomial potentials take `coefficients` only")

    @classmethod
    def zero(cls) -> "Potential":
        return cls()

    @classmethod
    def cosine(cls, amplitude: float = 1.0, frequency: int = 1) -> "Potential":
        """``amplitude * cos(frequency * x)``."""
        coeffs = [0.0] * (frequency + 1)
        coeffs[frequency] = amplitude
        return cls(kind="trig", cos=tuple(coeffs))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "Potential":
        return cls(kind="polynomial", coefficients=tuple(coefficients))

    @property
    def is_zero(self) -> bool:
        return not any(self.cos) and not any(self.sin) and not any(self.coefficients)

    @property
    def degree(self) -> int:
        """Highest trigonometric frequency (trig) or polynomial degree."""
        if self.kind == "trig":
            nz = [j for j, c in enumerate(self.cos) if c] + [j for j, c in enumerate(self.sin) if c]
        else:
            nz = [j for j, c in enumerate(self.coefficients) if c]
        return max(nz, default=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.kind == "trig":
            for j, c in enumerate(self.cos):
                if c:
                    out += c * np.cos(j * x)
            for j, c in enumerate(self.sin):
                if c:
                    out += c * np.sin(j * x)
        else:
            out = np.polynomial.polynomial.polyval(x, self.coefficients) + out
        return out

    def to_dict(self) -> dict:
        if self.kind == "trig":
            return {"kind": "trig", "cos": list(self.cos), "sin": list(self.sin)}
        return {"kind": "polynomial", "coefficients": list(self.coefficients)}

    @classmethod
    def from_dict(cls, d) -> "Potential":
        if d is None or d == 0 or d == "zero":
            return cls.zero()
        if isinstance(d, Potential):
            return d
        kind = d.get("kind", "trig")
        if kind == "zero":
            return cls.zero()
        if kind == "cosine":
            return cls.cosine(d.get("amplitude", 1.0), int(d.get("frequency", 1)))
        return cls(kind=kind, cos=tuple(d.get("cos", ())), sin=tuple(d.get("sin", ())),
                   coefficients=tuple(d.get("coefficients", ())))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Order-``dim`` Galerkin instantiation of ``(A, B)``.

    Attributes
    ----------
    eigenvalues : ndarray, shape (dim,)
        Positive, non-decreasing ``lambda_k`` with ``A phi_k = i lambda_k phi_k``.
    b_matrix : ndarray, shape (dim, dim), complex
        Skew-Hermitian compression of ``B`` in the basis ``Phi``.
    geometry : str
        ``"dirichlet_box"`` or ``"flat_torus"``.
    v, w : Potential
        Drift and control potentials.
    provenance : str
        ``"analytic"`` when ``Phi`` is the reference sine/Fourier basis,
        ``"numerically_diagonalized"`` otherwise.
    shift : float
        Constant absorbed into ``V`` (``1.0`` on the torus).
    basis : ndarray, shape (n_ref, dim), optional
        Columns are the ``phi_k`` expanded in the reference basis.
    """

    eigenvalues: np.ndarray
    b_matrix: np.ndarray
    geometry: str = "dirichlet_box"
    v: Potential = field(default_factory=Potential.zero)
    w: Potential = field(default_factory=Potential.zero)
    provenance: str = "analytic"
    shift: float = 0.0
    quad_points: Optional[int] = None
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        b = np.asarray(self.b_matrix, dtype=complex)
        if b.shape != (lam.size, lam.size):
            raise ValueError(f"b_matrix shape {b.shape} does not match dim {lam.size}")
        if lam.size == 0:
            raise ValueError("model dimension must be positive")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(b))):
            raise ValueError("model entries must be finite")
        if np.any(lam <= 0):
            raise ModelDiagnosticsError("eigenvalues must be strictly positive (A invertible)")
        if np.any(np.diff(lam) < 0):
            raise ModelDiagnosticsError("eigenvalues must be non-decreasing")
        if np.max(np.abs(b + b.conj().T)) > 1e-12:
            raise ValueError("b_matrix is not skew-Hermitian")
        object.__setattr__(self, "eigenvalues", _frozen(lam))
        object.__setattr__(self, "b_matrix", _frozen(b))
        if self.basis is not None:
            object.__setattr__(self, "basis", _frozen(self.basis))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def a_matrix(self) -> np.ndarray:
        """``A`` in the basis ``Phi``: ``i diag(lambda)``."""
        return np.diag(1j * self.eigenvalues)

    def generator(self, u: float) -> np.ndarray:
        """Matrix of ``A + u B``."""
        return self.a_matrix + u * self.b_matrix

    def __eq__(self, other):
        if not isinstance(other, SpectralModel):
            return NotImplemented
        same_basis = (self.basis is None and other.basis is None) or (
            self.basis is not None and other.basis is not None
            and self.basis.shape == other.basis.shape
            and np.array_equal(self.basis, other.basis))
        return (self.geometry == other.geometry and self.provenance == other.provenance
                and self.v == other.v and self.w == other.w and self.shift == other.shift
                and np.array_equal(self.eigenvalues, other.eigenvalues)
                and np.array_equal(self.b_matrix, other.b_matrix) and same_basis)

    __hash__ = None


# ---------------------------------------------------------------------------
# quadrature and reference bases


def _gauss_legendre(a: float, b: float, quad_points: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``.

    The interval is cut into ``ceil(quad_points / PANEL_ORDER)`` equal panels,
    each carrying a ``PANEL_ORDER``-point rule.
    """
    panels = max(1, -(-quad_points // PANEL_ORDER))
    x0, w0 = np.polynomial.legendre.leggauss(PANEL_ORDER)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()
    return x, w


def _sine_basis(n: int, x: np.ndarray) -> np.ndarray:
    modes = np.arange(1, n + 1)
    return math.sqrt(2 / math.pi) * np.sin(np.outer(modes, x))


def _torus_modes(n: int) -> np.ndarray:
    """Fourier indices ``0, 1, -1, 2, -2, ...``."""
    j = np.arange(n)
    return np.where(j % 2 == 1, (j + 1) // 2, -(j // 2))


def _fourier_basis(n: int, x: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(_torus_modes(n), x)) / math.sqrt(2 * math.pi)


def _reference_setup(geometry: str, n: int):
    if geometry == "dirichlet_box":
        interval = (0.0, math.pi)
        bare = np.arange(1, n + 1, dtype=float) ** 2
        return interval, bare, _sine_basis
    interval = (0.0, 2 * math.pi)
    bare = _torus_modes(n).astype(float) ** 2
    return interval, bare, _fourier_basis


def _multiplication_matrix(geometry, potential, n, quad_points):
    """``<e_j, f e_k>`` in the reference basis."""
    (a, b), _, basis_fn = _reference_setup(geometry, n)
    x, w = _gauss_legendre(a, b, quad_points)
    e = basis_fn(n, x)
    return (e.conj() * (w * potential(x))) @ e.T


def _checked_multiplication_matrix(geometry, potential, n, quad_points, what):
    if potential.is_zero:
        return np.zeros((n, n))
    m1 = _multiplication_matrix(geometry, potential, n, quad_points)
    m2 = _multiplication_matrix(geometry, potential, n, 2 * quad_points)
    drift = np.max(np.abs(m1 - m2))
    if drift > QUADRATURE_TOL:
        raise AccuracyError(
            f"quadrature for {what} not converged at quad_points={quad_points}: "
            f"doubling changes entries by {drift:.3e}")
    m = 0.5 * (m1 + m1.conj().T)
    if geometry == "dirichlet_box":
        m = m.real
    return m


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column real positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivots) / pivots)[None, :]


def _build(geometry, n, v, w, quad_points, shift):
    if n < 1:
        raise ValueError("dimension must be at least 1")
    v = Potential.from_dict(v) if not isinstance(v, Potential) else v
    w = Potential.from_dict(w) if not isinstance(w, Potential) else w
    if quad_points is None:
        quad_points = 8 * n + 64
    if quad_points < 4 * n:
        raise ValueError(f"quad_points={quad_points} must be at least 4*n={4 * n}")
    _, bare, _ = _reference_setup(geometry, n)
    w_ref = _checked_multiplication_matrix(geometry, w, n, quad_points, "W")
    if v.is_zero:
        # the 0, 1, -1, 2, ... torus ordering is already non-decreasing
        lam = bare + shift
        basis = np.eye(n)
        w_phi = w_ref
        provenance = "analytic"
    else:
        v_ref = _checked_multiplication_matrix(geometry, v, n, quad_points, "V")
        h = np.diag(bare + shift) + v_ref
        lam, vecs = np.linalg.eigh(h)
        if n > 1 and np.min(np.diff(lam)) < DEGENERACY_GAP:
            raise ModelDiagnosticsError(
                f"numerical spectrum has a gap {np.min(np.diff(lam)):.3e} below "
                f"{DEGENERACY_GAP}; eigenbasis is not well defined")
        if lam[0] <= 0:
            raise ModelDiagnosticsError(
                f"lowest eigenvalue {lam[0]:.6g} is not positive; A is not invertible")
        basis = _fix_phases(vecs)
        if geometry == "dirichlet_box":
            basis = basis.real
        w_phi = basis.conj().T @ w_ref @ basis
        w_phi = 0.5 * (w_phi + w_phi.conj().T)
        provenance = "numerically_diagonalized"
    b = -1j * w_phi
    return SpectralModel(eigenvalues=lam, b_matrix=b, geometry=geometry, v=v, w=w,
                         provenance=provenance, shift=float(shift),
                         quad_points=int(quad_points), basis=basis)


def build_box_model(n: int, v_spec=None, w_spec=None, quad_points: Optional[int] = None) -> SpectralModel:
    """Galerkin model of order ``n`` on the Dirichlet interval ``(0, pi)``.

    Parameters
    ----------
    n : int
        Truncation order.
    v_spec, w_spec : Potential or dict, optional
        Drift potential ``V`` and control potential ``W``; zero when omitted.
    quad_points : int, optional
        Quadrature node budget, at least ``4 n``. Defaults to ``8 n + 64``.

    Raises
    ------
    ValueError
        Invalid sizes or non-real potentials.
    AccuracyError
        Doubling ``quad_points`` moves a matrix entry by more than 1e-10.
    ModelDiagnosticsError
        The numerical spectrum of ``-Delta + V`` is degenerate or not positive.
    """
    return _build("dirichlet_box", n, v_spec, w_spec, quad_points, shift=0.0)


def build_torus_model(n: int, v_spec=None, w_spec=None, quad_points: Optional[int] = None,
                      shift: float = 1.0) -> SpectralModel:
    """Galerkin model of order ``n`` on the flat torus ``(0, 2 pi)``.

    The Laplacian has a zero mode on the torus, so ``shift`` (default 1) is
    added to ``V``. With ``V = 0`` the spectrum ``1 + m**2`` is doubly
    degenerate; the Fourier basis is used as is in that case.
    """
    if shift <= 0 and (v_spec is None or Potential.from_dict(v_spec).is_zero):
        raise ModelDiagnosticsError("the torus needs a positive shift for A to be invertible")
    return _build("flat_torus", n, v_spec, w_spec, quad_points, shift=shift)


def rebuild(model: SpectralModel, n: int) -> SpectralModel:
    """Build a fresh model of order ``n`` with the same geometry and potentials.

    Used to double a reference truncation. The quadrature budget is scaled
    with ``n``.
    """
    qp = None if model.quad_points is None else max(model.quad_points * n // model.dim, 4 * n)
    if model.geometry == "dirichlet_box":
        return build_box_model(n, model.v, model.w, qp)
    return build_torus_model(n, model.v, model.w, qp, shift=model.shift)


# ---------------------------------------------------------------------------
# compressions, projections and norms


def compress(model: SpectralModel, n: int) -> SpectralModel:
    """Order-``n`` compression: leading eigenvalues and leading block of ``B``."""
    if not 1 <= n <= model.dim:
        raise ValueError(f"compression order {n} outside [1, {model.dim}]")
    if n == model.dim:
        return model
    basis = None if model.basis is None else model.basis[:, :n]
    return dataclasses.replace(model, eigenvalues=model.eigenvalues[:n],
                               b_matrix=model.b_matrix[:n, :n], basis=basis)


def _as_state(state) -> np.ndarray:
    psi = np.asarray(state, dtype=complex)
    if psi.ndim != 1:
        raise ValueError("state must be a 1-D coefficient vector")
    if not np.all(np.isfinite(psi)):
        raise ValueError("state has non-finite entries")
    return psi


def project(state, n: int) -> np.ndarray:
    """Keep the first ``n`` coefficients (``pi_N``)."""
    psi = _as_state(state)
    if not 1 <= n <= psi.size:
        raise ValueError(f"cannot project a length-{psi.size} state to {n}")
    return psi[:n].copy()


def lift(state, n_target: int) -> np.ndarray:
    """Zero-pad to length ``n_target``."""
    psi = _as_state(state)
    if n_target < psi.size:
        raise ValueError(f"cannot lift a length-{psi.size} state to {n_target}")
    out = np.zeros(n_target, dtype=complex)
    out[:psi.size] = psi
    return out


def eigenstate(dim: int, index: int) -> np.ndarray:
    """Coefficient vector of ``phi_index`` (1-based)."""
    if not 1 <= index <= dim:
        raise ValueError(f"eigenvector index {index} outside [1, {dim}]")
    e = np.zeros(dim, dtype=complex)
    e[index - 1] = 1.0
    return e


def sobolev_norm(model: SpectralModel, state, k: float) -> float:
    """``sqrt(sum_n lambda_n**k |c_n|**2)``; ``k = 0`` is the Hilbert norm."""
    if k < 0:
        raise ValueError("Sobolev order k must be non-negative")
    psi = _as_state(state)
    if psi.size != model.dim:
        raise ValueError(f"state length {psi.size} does not match model dim {model.dim}")
    if k == 0:
        return float(np.linalg.norm(psi))
    return float(np.linalg.norm(model.eigenvalues ** (k / 2) * psi))


def weighted_similarity(model: SpectralModel, k: float) -> np.ndarray:
    """``diag(lambda**(k/2)) B diag(lambda**(-k/2))``, i.e. ``B`` acting on ``D(|A|^{k/2})``."""
    if k < 0:
        raise ValueError("Sobolev order k must be non-negative")
    if k == 0:
        return np.array(model.b_matrix)
    d = model.eigenvalues ** (k / 2)
    return d[:, None] * model.b_matrix / d[None, :]


def evaluate_state(model: SpectralModel, state, x) -> np.ndarray:
    """Evaluate ``psi(x) = sum_k c_k phi_k(x)`` on points ``x``."""
    psi = _as_state(state)
    x = np.asarray(x, dtype=float)
    basis = np.eye(model.dim) if model.basis is None else model.basis
    _, _, basis_fn = _reference_setup(model.geometry, basis.shape[0])
    return (basis @ psi) @ basis_fn(basis.shape[0], x)


# ---------------------------------------------------------------------------
# JSON


def _pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _unpairs(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_json(model: SpectralModel, indent: Optional[int] = None) -> str:
    """Serialize to JSON; floats use Python's shortest round-trip repr."""
    doc = {
        "dim": model.dim,
        "eigenvalues": [float(x) for x in model.eigenvalues],
        "b_matrix": _pairs(model.b_matrix),
        "geometry": model.geometry,
        "potentials": {"V": model.v.to_dict(), "W": model.w.to_dict()},
        "provenance": model.provenance,
        "shift": model.shift,
        "quad_points": model.quad_points,
    }
    if model.basis is not None:
        doc["basis"] = _pairs(model.basis)
    return json.dumps(doc, indent=indent)


def model_from_json(text: str) -> SpectralModel:
    doc = json.loads(text)
    lam = np.asarray(doc["eigenvalues"], dtype=float)
    if lam.size != doc["dim"]:
        raise ValueError("dim does not match the eigenvalue count")
    basis = doc.get("basis")
    if basis is not None:
        basis = _unpairs(basis)
        if doc["geometry"] == "dirichlet_box":
            basis = basis.real
    pots = doc.get("potentials", {})
    return SpectralModel(
        eigenvalues=lam,
        b_matrix=_unpairs(doc["b_matrix"]),
        geometry=doc["geometry"],
        v=Potential.from_dict(pots.get("V")),
        w=Potential.from_dict(pots.get("W")),
        provenance=doc["provenance"],
        shift=float(doc.get("shift", 0.0)),
        quad_points=doc.get("quad_points"),
        basis=basis,
    )
