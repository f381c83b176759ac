"""Dense linear algebra kernels shared by every other module.

Conventions (fixed once, used everywhere):

* Operators are plain complex numpy arrays of shape ``(d, d)``.
* Superoperators are ``(d*d, d*d)`` arrays acting on column-stacked matrices:
  ``vec`` stacks columns (Fortran order), so ``vec(A X B) = (B.T (x) A) vec(X)``
  and a conjugation ``X -> A X B^dag`` becomes ``kron(conj(B), A)``.
* ``picture`` tags on :class:`SuperOp` distinguish the Schrodinger action on
  states from the Heisenberg action on observables.  The two are HS-adjoint:
  the Heisenberg matrix is the conjugate transpose of the Schrodinger one.
* The KMS weighting operator is ``W: X -> rho^{1/4} X rho^{1/4}``; in vec form
  ``W = kron(conj(rho^{1/4}), rho^{1/4})``, Hermitian and positive.  A
  generator satisfies quantum detailed balance w.r.t. ``rho`` exactly when
  ``M = W L_heis W^{-1}`` is Hermitian; ``M`` shares the spectrum of the
  generator, so gaps and mixing rates are read off a Hermitian eigenproblem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    DomainError,
    IndexOutOfRange,
    NegativeWeight,
    NonHermitianInput,
    NotDetailedBalanced,
)

# ---------- tolerances ----------

HERM_INPUT_TOL = 1e-12      # relative Hermiticity tolerance on inputs
DETAILED_BALANCE_TOL = 1e-8  # relative Hermitization residual threshold
ZERO_EIG_REL_TOL = 1e-9     # |eig| < tol * ||M|| counts as zero

# ---------- Pauli matrices ----------

SI = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": SI, "X": SX, "Y": SY, "Z": SZ}


# ---------- vec / unvec ----------

def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatch(f"vector of length {v.size} is not a square matrix")
    return v.reshape((d, d), order="F")


def dag(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat).conj().T


def kron_all(ops) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def pauli_string(spec: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``pauli_string("XIZ")``."""
    return kron_all(PAULI[c] for c in spec)


def herm_defect(mat: np.ndarray) -> float:
    """Relative deviation from Hermiticity, ``||A - A^dag|| / max(||A||, tiny)``."""
    mat = np.asarray(mat)
    scale = np.linalg.norm(mat)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(mat - dag(mat)) / scale)


def assert_hermitian(mat: np.ndarray, tol: float = HERM_INPUT_TOL, what: str = "operator") -> None:
    defect = herm_defect(mat)
    if defect > tol:
        raise NonHermitianInput(f"{what} is not Hermitian (relative defect {defect:.3e})")


# ---------- spectral calculus ----------

def mat_func(op: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian operator through its eigenbasis.

    ``f`` is applied to the real eigenvalue array; any non-finite value in the
    result (log of a nonpositive eigenvalue, fractional power of a negative
    one, ...) raises ``DomainError`` rather than propagating NaNs.
    """
    op = np.asarray(op, dtype=complex)
    assert_hermitian(op, what="mat_func input")
    evals, evecs = np.linalg.eigh(op)
    with np.errstate(all="ignore"):
        fvals = np.asarray(f(evals), dtype=complex)
    if not np.all(np.isfinite(fvals)):
        raise DomainError("scalar function produced non-finite values on the spectrum")
    return (evecs * fvals) @ dag(evecs)


def frac_power(rho: np.ndarray, p: float) -> np.ndarray:
    """``rho**p`` for positive definite ``rho`` (eigenvalues clipped at tiny)."""
    def f(x):
        if np.any(x <= 0.0) and p < 0:
            raise DomainError("negative power of a singular operator")
        return np.power(np.clip(x, 1e-300, None), p)
    return mat_func(rho, f)


# ---------- embeddings and partial trace ----------

def embed_site(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based) into ``n_qubits``."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise DimensionMismatch("embed_site expects a 2x2 operator")
    if not 0 <= site < n_qubits:
        raise IndexOutOfRange(f"site {site} outside 0..{n_qubits - 1}")
    return kron_all(op if k == site else SI for k in range(n_qubits))


def partial_trace_last(op: np.ndarray, dim_last: int) -> np.ndarray:
    """Trace out the last tensor factor of dimension ``dim_last``."""
    op = np.asarray(op)
    d = op.shape[0]
    if op.shape != (d, d) or d % dim_last != 0:
        raise DimensionMismatch("operator dimension not divisible by dim_last")
    ds = d // dim_last
    return np.einsum("ikjk->ij", op.reshape(ds, dim_last, ds, dim_last))


# ---------- superoperators ----------

@dataclass
class SuperOp:
    """A dense superoperator matrix with a picture tag.

    ``picture`` is ``"schrodinger"`` (acts on states) or ``"heisenberg"``
    (acts on observables).  ``to_heisenberg`` / ``to_schrodinger`` convert via
    the Hilbert-Schmidt adjoint.
    """

    matrix: np.ndarray
    picture: str = "schrodinger"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d2 = self.matrix.shape[0]
        if self.matrix.shape != (d2, d2):
            raise DimensionMismatch("superoperator matrix must be square")
        if self.picture not in ("schrodinger", "heisenberg"):
            raise DimensionMismatch(f"unknown picture {self.picture!r}")

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def to_heisenberg(self) -> "SuperOp":
        if self.picture == "heisenberg":
            return self
        return SuperOp(dag(self.matrix), "heisenberg")

    def to_schrodinger(self) -> "SuperOp":
        if self.picture == "schrodinger":
            return self
        return SuperOp(dag(self.matrix), "schrodinger")

    def __call__(self, mat: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(mat))


def left_mult(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    return np.kron(np.eye(d), op)


def right_mult(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    return np.kron(np.asarray(op).T, np.eye(d))


def conj_by(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """vec-form of ``X -> A X B^dag`` (``B = A`` when omitted)."""
    if b is None:
        b = a
    return np.kron(np.conj(b), a)


def ham_superop(h: np.ndarray) -> np.ndarray:
    """vec-form of the coherent part ``rho -> -i [H, rho]``."""
    return -1j * (left_mult(h) - right_mult(h))


def gkls_bilinear(ops: list[np.ndarray], coeff: np.ndarray) -> np.ndarray:
    """Schrodinger dissipator with cross terms.

    Builds ``rho -> sum_{k,l} C[k,l] (A_k rho A_l^dag - 1/2 {A_l^dag A_k, rho})``
    as a vec-form matrix.  ``C`` must be Hermitian (PSD for a completely
    positive dissipator, but that is the caller's invariant to check).
    """
    n = len(ops)
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.shape != (n, n):
        raise DimensionMismatch("coefficient matrix shape must match op count")
    d = ops[0].shape[0]
    out = np.zeros((d * d, d * d), dtype=complex)
    anticomm_part = np.zeros((d, d), dtype=complex)
    for k in range(n):
        for l in range(n):
            c = coeff[k, l]
            if c == 0.0:
                continue
            out += c * conj_by(ops[k], ops[l])
            anticomm_part += 0.5 * c * (dag(ops[l]) @ ops[k])
    out -= left_mult(anticomm_part) + right_mult(dag(anticomm_part))
    return out


def superop_from_gkls(hamiltonian: np.ndarray | None,
                      jumps: list[np.ndarray],
                      rates: list[float] | None = None) -> SuperOp:
    """Schrodinger-picture GKLS generator from a Hamiltonian and jump list.

    ``rho -> -i[H, rho] + sum_a r_a (A_a rho A_a^dag - 1/2 {A_a^dag A_a, rho})``
    """
    if rates is None:
        rates = [1.0] * len(jumps)
    if len(rates) != len(jumps):
        raise DimensionMismatch("one rate per jump operator")
    for r in rates:
        if r < 0.0:
            raise NegativeWeight(f"negative jump rate {r}")
    if jumps:
        d = jumps[0].shape[0]
    elif hamiltonian is not None:
        d = np.asarray(hamiltonian).shape[0]
    else:
        raise DimensionMismatch("need at least a Hamiltonian or one jump")
    mat = np.zeros((d * d, d * d), dtype=complex)
    if hamiltonian is not None:
        assert_hermitian(hamiltonian, what="GKLS Hamiltonian")
        mat += ham_superop(np.asarray(hamiltonian, dtype=complex))
    if jumps:
        mat += gkls_bilinear([np.asarray(a, dtype=complex) for a in jumps],
                             np.diag(np.asarray(rates, dtype=float)))
    return SuperOp(mat, "schrodinger")


# ---------- Choi / CPTP diagnostics ----------

def choi_matrix(sop: SuperOp) -> np.ndarray:
    """Choi matrix (column-stacking convention) of a Schrodinger superoperator.

    ``J[i*d+k, j*d+l] = S[l*d+k, j*d+i]`` so that ``J = sum_{ij} |i><j| (x)
    S(|i><j|)`` up to index ordering; CP iff ``J >= 0``, TP iff the partial
    trace over the second factor is the identity.
    """
    s = sop.to_schrodinger().matrix
    d = sop.dim
    j = s.reshape(d, d, d, d)          # S[(l,k),(j,i)] with column-major vec
    j = j.transpose(3, 1, 2, 0)        # -> J[(i,k),(j,l)]
    return j.reshape(d * d, d * d)


def cp_residual(sop: SuperOp) -> float:
    """Minimum eigenvalue of the Choi matrix (>= -1e-9 for honest channels)."""
    j = choi_matrix(sop)
    return float(np.linalg.eigvalsh(0.5 * (j + dag(j)))[0])


def tp_residual(sop: SuperOp) -> float:
    """Max-norm deviation from trace preservation."""
    s = sop.to_schrodinger().matrix
    d = sop.dim
    ident = vec(np.eye(d))
    return float(np.max(np.abs(dag(s) @ ident - ident)))


def trace_norm(mat: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(mat), compute_uv=False)))


# ---------- KMS hermitization ----------

@dataclass
class HermitizeResult:
    matrix: np.ndarray            # Hermitian (after symmetrization) d^2 x d^2
    residual: float               # ||M - M^dag|| / ||M||, pre-symmetrization
    spectrum: np.ndarray = field(repr=False)  # ascending real eigenvalues
    zero_multiplicity: int = 1
    zero_threshold: float = 0.0


def kms_weight(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """vec-form of ``W: X -> rho^{1/4} X rho^{1/4}`` and its inverse."""
    r4 = frac_power(rho, 0.25)
    r4inv = frac_power(rho, -0.25)
    return np.kron(np.conj(r4), r4), np.kron(np.conj(r4inv), r4inv)


def kms_hermitize(lind: SuperOp, rho: np.ndarray,
                  require: bool = True,
                  tol: float = DETAILED_BALANCE_TOL) -> HermitizeResult:
    """Conjugate the generator into the KMS-Hermitian frame and diagonalize.

    For a Schrodinger generator ``L`` with full-rank candidate stationary
    state ``rho``, forms ``M = W L_heis W^{-1}`` with ``W`` the quarter-power
    weighting.  ``M`` is Hermitian exactly when ``L`` is self-adjoint for the
    KMS inner product at ``rho``; its (real) spectrum is the spectrum of
    ``L``.  The returned matrix is the Hermitian symmetrization, the residual
    quantifies how far from detailed balance the input was.

    Raises ``NotDetailedBalanced`` when ``require`` and the relative residual
    exceeds ``tol``.
    """
    lheis = lind.to_heisenberg().matrix
    w, winv = kms_weight(rho)
    m = w @ lheis @ winv
    scale = np.linalg.norm(m)
    residual = 0.0 if scale == 0.0 else float(np.linalg.norm(m - dag(m)) / scale)
    if require and residual > tol:
        raise NotDetailedBalanced(
            f"hermitization residual {residual:.3e} exceeds {tol:.1e}")
    m = 0.5 * (m + dag(m))
    spectrum = np.linalg.eigvalsh(m)
    norm_m = float(np.max(np.abs(spectrum))) if spectrum.size else 0.0
    zero_threshold = ZERO_EIG_REL_TOL * norm_m
    zero_multiplicity = int(np.sum(np.abs(spectrum) < zero_threshold))
    return HermitizeResult(matrix=m, residual=residual, spectrum=spectrum,
                           zero_multiplicity=zero_multiplicity,
                           zero_threshold=zero_threshold)
