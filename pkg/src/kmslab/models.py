"""Model Hamiltonians, Gibbs states, Bohr decompositions, jump sets.

Energies are dimensionless throughout; ``beta`` carries the inverse unit.
Hamiltonians keep their eigendecomposition so downstream code never
re-diagonalizes, and local models keep their Pauli term list so support
properties can be tested structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClusterAmbiguity, InvalidSpec
from .numlin import PAULI, assert_hermitian, dag, embed_site, kron_all

BOHR_TOL_REL = 1e-9   # default cluster tolerance, relative to ||H||


# ---------- Hamiltonians ----------

@dataclass
class Hamiltonian:
    n_qubits: int
    matrix: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    terms: list = field(default_factory=list)   # (coeff, pauli string) pairs
    eigvals: np.ndarray = None
    eigvecs: np.ndarray = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        assert_hermitian(self.matrix, what="Hamiltonian")
        if self.eigvals is None:
            self.eigvals, self.eigvecs = np.linalg.eigh(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.max(np.abs(self.eigvals))) if self.dim else 0.0


def _matrix_from_terms(n_qubits: int, terms) -> np.ndarray:
    mat = np.zeros((2 ** n_qubits, 2 ** n_qubits), dtype=complex)
    for coeff, string in terms:
        mat += coeff * kron_all(PAULI[c] for c in string)
    return mat


def single_qubit(omega0: float = 1.0) -> Hamiltonian:
    """One qubit with splitting ``omega0``: ``H = (omega0/2) Z``."""
    return Hamiltonian(1, 0.5 * omega0 * PAULI["Z"], "single_qubit",
                       {"omega0": omega0}, [(0.5 * omega0, "Z")])


def commuting_zz_chain(n_qubits: int, coupling: float = 1.0,
                       g_z: float = 0.0) -> Hamiltonian:
    """Open ZZ chain with a uniform longitudinal field (fully commuting)."""
    if n_qubits < 1:
        raise InvalidSpec("need at least one qubit")
    terms = []
    for i in range(n_qubits - 1):
        s = ["I"] * n_qubits
        s[i] = s[i + 1] = "Z"
        terms.append((coupling, "".join(s)))
    for i in range(n_qubits):
        s = ["I"] * n_qubits
        s[i] = "Z"
        terms.append((g_z, "".join(s)))
    return Hamiltonian(n_qubits, _matrix_from_terms(n_qubits, terms),
                       "commuting_zz_chain",
                       {"coupling": coupling, "g_z": g_z}, terms)


def stabilizer_pair(n_qubits: int = 4, j_z: float = 1.0,
                    j_x: float = 0.5) -> Hamiltonian:
    """``H = -j_z Z^(x)n - j_x X^(x)n`` — two global stabilizer-type terms.

    The terms commute for even ``n_qubits`` (each single-site anticommutation
    contributes a sign, and there are ``n`` of them), giving the smallest
    CSS-flavored commuting model with non-classical structure.
    """
    if n_qubits < 2 or n_qubits % 2:
        raise InvalidSpec("stabilizer_pair needs an even qubit count >= 2")
    terms = [(-j_z, "Z" * n_qubits), (-j_x, "X" * n_qubits)]
    return Hamiltonian(n_qubits, _matrix_from_terms(n_qubits, terms),
                       "stabilizer_pair", {"j_z": j_z, "j_x": j_x}, terms)


def nn_chain_1d(n_qubits: int, couplings: dict) -> Hamiltonian:
    """Open nearest-neighbour chain.

    ``couplings`` maps two-letter Pauli pairs (``"XX"``, ``"ZZ"``, ...) to
    bond coefficients and single letters (``"X"``, ``"Z"``) to uniform field
    coefficients.
    """
    terms = []
    for key, coeff in couplings.items():
        if coeff == 0.0:
            continue
        if len(key) == 2:
            for i in range(n_qubits - 1):
                s = ["I"] * n_qubits
                s[i], s[i + 1] = key[0], key[1]
                terms.append((coeff, "".join(s)))
        elif len(key) == 1:
            for i in range(n_qubits):
                s = ["I"] * n_qubits
                s[i] = key
                terms.append((coeff, "".join(s)))
        else:
            raise InvalidSpec(f"coupling key {key!r} must be 1 or 2 Paulis")
    return Hamiltonian(n_qubits, _matrix_from_terms(n_qubits, terms),
                       "nn_chain_1d", {"couplings": dict(couplings)}, terms)


def random_kl_local(n_qubits: int, k_local: int, l_per_qubit: int,
                    h_max: float, seed: int) -> Hamiltonian:
    """Random (k, l)-local Hamiltonian.

    Sampler: repeatedly draw a support of uniform size in 1..k on uniformly
    chosen sites, a uniform non-identity Pauli on each support site, and a
    coefficient uniform in [-h_max, h_max]; reject any draw that would push a
    qubit past l terms; stop after 64 consecutive rejections.  Simple
    rejection keeps the distribution easy to state and is plenty for the
    qubit counts used here.
    """
    if k_local < 1 or k_local > n_qubits:
        raise InvalidSpec("need 1 <= k_local <= n_qubits")
    if l_per_qubit < 1:
        raise InvalidSpec("need l_per_qubit >= 1")
    rng = np.random.default_rng(seed)
    load = np.zeros(n_qubits, dtype=int)
    terms = []
    misses = 0
    while misses < 64:
        size = int(rng.integers(1, k_local + 1))
        sites = rng.choice(n_qubits, size=size, replace=False)
        if np.any(load[sites] >= l_per_qubit):
            misses += 1
            continue
        misses = 0
        load[sites] += 1
        s = ["I"] * n_qubits
        for q in sites:
            s[q] = "XYZ"[rng.integers(3)]
        terms.append((float(rng.uniform(-h_max, h_max)), "".join(s)))
    if not terms:
        raise InvalidSpec("sampler produced no terms")
    return Hamiltonian(n_qubits, _matrix_from_terms(n_qubits, terms),
                       "random_kl_local",
                       {"k_local": k_local, "l_per_qubit": l_per_qubit,
                        "h_max": h_max, "seed": seed}, terms)


def custom(matrix: np.ndarray) -> Hamiltonian:
    matrix = np.asarray(matrix, dtype=complex)
    n = int(round(np.log2(matrix.shape[0])))
    if 2 ** n != matrix.shape[0]:
        raise InvalidSpec("custom Hamiltonian dimension must be a power of 2")
    return Hamiltonian(n, matrix, "custom")


_BUILDERS = {
    "single_qubit": lambda p: single_qubit(p.get("omega0", 1.0)),
    "commuting_zz_chain": lambda p: commuting_zz_chain(
        p["n_qubits"], p.get("coupling", 1.0), p.get("g_z", 0.0)),
    "stabilizer_pair": lambda p: stabilizer_pair(
        p.get("n_qubits", 4), p.get("j_z", 1.0), p.get("j_x", 0.5)),
    "nn_chain_1d": lambda p: nn_chain_1d(p["n_qubits"], p["couplings"]),
    "random_kl_local": lambda p: random_kl_local(
        p["n_qubits"], p["k_local"], p["l_per_qubit"], p["h_max"], p["seed"]),
    "custom": lambda p: custom(p["matrix"]),
}


def build_hamiltonian(spec: dict) -> Hamiltonian:
    """Dispatch on ``spec["model_kind"]``; remaining keys are parameters."""
    try:
        kind = spec["model_kind"]
    except KeyError:
        raise InvalidSpec("model spec needs a 'model_kind' key") from None
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise InvalidSpec(f"unknown model kind {kind!r}") from None
    params = {k: v for k, v in spec.items() if k != "model_kind"}
    try:
        return builder(params)
    except KeyError as exc:
        raise InvalidSpec(f"model kind {kind!r} missing parameter {exc}") from None


# ---------- Gibbs states ----------

@dataclass
class GibbsState:
    rho: np.ndarray
    beta: float
    log_z: float
    log_inv_norm: float   # log ||rho^{-1}|| computed without forming rho^{-1}

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def gibbs_state(ham: Hamiltonian, beta: float) -> GibbsState:
    """Gibbs state ``exp(-beta H)/Z`` assembled in the eigenbasis.

    ``log_inv_norm`` is evaluated as ``beta (E_max - E_min) +
    log sum_i exp(-beta (E_i - E_min))``, which never over/underflows.
    """
    e = ham.eigvals
    shifted = -beta * (e - e.min())
    weights = np.exp(shifted)
    z_shifted = float(weights.sum())
    p = weights / z_shifted
    rho = (ham.eigvecs * p) @ dag(ham.eigvecs)
    rho = 0.5 * (rho + dag(rho))
    log_z = float(np.log(z_shifted) - beta * e.min())
    log_inv_norm = float(beta * (e.max() - e.min()) + np.log(z_shifted))
    return GibbsState(rho=rho, beta=beta, log_z=log_z, log_inv_norm=log_inv_norm)


# ---------- Bohr decomposition ----------

@dataclass
class BohrDecomposition:
    frequencies: np.ndarray          # ascending, exactly closed under negation
    components: list                 # A_nu aligned with frequencies
    tol_cluster: float

    def component(self, nu: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.frequencies - nu)))
        if abs(self.frequencies[idx] - nu) > max(10 * self.tol_cluster, 1e-12):
            raise InvalidSpec(f"no Bohr component at frequency {nu}")
        return self.components[idx]


def _cluster_1d(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Single-linkage clustering of sorted reals: split at gaps > tol."""
    order = np.argsort(values)
    sv = values[order]
    breaks = np.nonzero(np.diff(sv) > tol)[0]
    return np.split(sv, breaks + 1)


def bohr_decompose(ham: Hamiltonian, op: np.ndarray,
                   tol_cluster: float | None = None) -> BohrDecomposition:
    """Split ``op`` into eigenoperators of ``[H, .]``.

    ``A_nu = sum_{E_i - E_j = nu} P_i A P_j`` raises energy by ``nu``, so
    ``[H, A_nu] = nu A_nu`` and, for Hermitian ``A``, ``A_nu^dag = A_{-nu}``.
    Eigenvalue differences are clustered by single linkage with tolerance
    ``tol_cluster`` (default 1e-9 ||H||); cluster centers are symmetrized so
    the frequency list is exactly closed under negation.  Components with
    negligible norm are dropped.

    Raises ``ClusterAmbiguity`` if two distinct clusters sit closer than
    10x the tolerance — frequencies would not be well separated.
    """
    if tol_cluster is None:
        tol_cluster = BOHR_TOL_REL * max(ham.norm(), 1.0)
    e, v = ham.eigvals, ham.eigvecs
    diffs = (e[:, None] - e[None, :]).ravel()
    clusters = _cluster_1d(diffs, tol_cluster)
    centers = np.array([c.mean() for c in clusters])
    if len(centers) > 1 and np.min(np.diff(np.sort(centers))) < 10 * tol_cluster:
        raise ClusterAmbiguity(
            "Bohr frequency clusters closer than 10x tol_cluster; "
            "tighten the tolerance or perturb the model")

    # symmetrize centers so that nu and -nu are exact negatives
    sym = centers.copy()
    for i, c in enumerate(centers):
        j = int(np.argmin(np.abs(centers + c)))
        mag = 0.5 * (abs(c) + abs(centers[j]))
        sym[i] = np.sign(c) * mag if abs(c) > tol_cluster else 0.0

    ad = dag(v) @ np.asarray(op, dtype=complex) @ v   # A in the eigenbasis
    diff_mat = e[:, None] - e[None, :]
    scale = max(float(np.linalg.norm(op)), 1e-300)
    freqs, comps = [], []
    for c_sym, c_raw in zip(sym, centers):
        mask = np.abs(diff_mat - c_raw) <= tol_cluster
        block = np.where(mask, ad, 0.0)
        comp = v @ block @ dag(v)
        if np.linalg.norm(comp) > 1e-13 * scale:
            freqs.append(c_sym)
            comps.append(comp)
    order = np.argsort(freqs)
    return BohrDecomposition(
        frequencies=np.array([freqs[i] for i in order]),
        components=[comps[i] for i in order],
        tol_cluster=tol_cluster)


# ---------- jump sets ----------

@dataclass
class JumpSet:
    ops: list
    labels: list            # (site, "X"|"Y"|"Z")
    norm_g: float           # block norm of the coupling set: 3N for Paulis

    def __len__(self) -> int:
        return len(self.ops)


def pauli_jump_set(n_qubits: int) -> JumpSet:
    """All single-site Paulis: self-adjoint, and the set is closed under
    conjugation, so one table of coefficients serves both raising and
    lowering directions."""
    ops, labels = [], []
    for site in range(n_qubits):
        for name in ("X", "Y", "Z"):
            ops.append(embed_site(PAULI[name], site, n_qubits))
            labels.append((site, name))
    return JumpSet(ops=ops, labels=labels, norm_g=float(3 * n_qubits))
