"""Construction of the KMS-detailed-balanced generator families.

All three families share one skeleton.  Given jump operators ``A^a`` with
Bohr components ``A^a_nu`` (``A_nu`` raises energy by ``nu``), a coefficient
table ``Lambda^a`` over frequency pairs defines the Schrodinger generator

    L(rho) = -i[B, rho] + sum_a sum_{nu1,nu2} Lambda^a_{nu1,nu2}
             (A^a_{nu1} rho A^a_{nu2}^dag - 1/2 {A^a_{nu2}^dag A^a_{nu1}, rho})

with coherent part

    B = sum_a sum_{nu1,nu2} tanh(-beta (nu1 - nu2) / 4) / (2i)
        Lambda^a_{nu1,nu2} A^a_{nu2}^dag A^a_{nu1}.

The table must satisfy ``Lambda_{nu1,nu2} = conj(Lambda)_{-nu1,-nu2}
exp(-beta (nu1 + nu2) / 2)`` and be PSD per jump; then ``L`` is self-adjoint
for the KMS inner product at the Gibbs state and fixes it.  The ``tanh``
part is not optional for that statement: the dissipator alone leaves a
residual ``-1/2 Lambda (e^{beta(nu1-nu2)/2} - 1)^2`` coefficient at the Gibbs
state which the coherent part cancels exactly.  Builders expose
``with_coherent=False`` anyway, for measuring exactly that failure.

Families:

* Gaussian filter (``build_gaussian_generator``): frequency weight
  ``gamma_kappa`` and an L2-normalized Gaussian filter of width ``kappa *
  beta`` give the closed form ``lambda_gaussian``; an independent
  Gauss-Hermite route (``build_gaussian_generator_quadrature``) exists solely
  to check it.
* Macroscopic bath (``build_mb_generator``): a tabulated bath function
  ``ghat`` with KMS tilt ``ghat(nu) = ghat(-nu) exp(-beta nu / 2)`` and a
  Gaussian off-diagonal factor set by the observation time ``T(alpha)``.
* Davies (``build_davies``): diagonal table ``gamma(nu)`` with
  ``gamma(-nu) = exp(beta nu) gamma(nu)``, no coherent part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    FrequencyOutOfBathRange,
    InvalidSpec,
    KappaBelowOne,
    KMSConditionViolation,
    KMSViolation,
    NonPositiveCoeffMatrix,
    QuadratureDivergence,
)
from .models import BohrDecomposition, GibbsState, Hamiltonian, JumpSet, bohr_decompose, gibbs_state
from .numlin import SuperOp, dag, gkls_bilinear, ham_superop

COEFF_PSD_TOL = -1e-10


# ---------- scalar building blocks of the Gaussian family ----------

def _check_kappa(kappa: float) -> None:
    if kappa < 1.0:
        raise KappaBelowOne(f"kappa = {kappa} < 1")


def f_kappa(kappa: float, beta: float, t) -> np.ndarray:
    """L2-normalized Gaussian filter ``exp(-t^2/(kappa beta)^2)`` in time."""
    _check_kappa(kappa)
    tau = kappa * beta
    return np.exp(-(np.asarray(t) / tau) ** 2) / ((np.pi / 2) ** 0.25 * np.sqrt(tau))


def fhat_kappa(kappa: float, beta: float, omega) -> np.ndarray:
    """Fourier transform of ``f_kappa`` (convention ``int f e^{-i omega t}``)."""
    _check_kappa(kappa)
    tau = kappa * beta
    return (2 * np.pi) ** 0.25 * np.sqrt(tau) * np.exp(-(tau * np.asarray(omega)) ** 2 / 4)


def gamma_kappa(kappa: float, beta: float, omega) -> np.ndarray:
    """Frequency weight ``exp(-(beta omega + 1)^2 / (2 (2 - 1/kappa^2)))``."""
    _check_kappa(kappa)
    s2 = 2.0 - 1.0 / kappa ** 2
    return np.exp(-((beta * np.asarray(omega) + 1.0) ** 2) / (2.0 * s2))


def gaussian_prefactor(kappa: float) -> float:
    """Overall constant ``2 pi sqrt((2 - 1/kappa^2)/2)`` of the closed form.

    Kept as a named quantity because the diagonal of ``lambda_gaussian``
    converges, as ``kappa -> inf``, to this constant times the reference rate
    ``exp(-(beta nu + 1)^2 / 4)``; comparisons against a Davies construction
    must include it.
    """
    _check_kappa(kappa)
    return 2.0 * np.pi * np.sqrt((2.0 - 1.0 / kappa ** 2) / 2.0)


def log_lambda_gaussian(kappa: float, beta: float, nu1: float, nu2: float) -> float:
    """``log`` of ``lambda_gaussian`` — exact even where the value underflows."""
    _check_kappa(kappa)
    x1, x2 = beta * nu1, beta * nu2
    return (np.log(gaussian_prefactor(kappa))
            - kappa ** 2 * (x1 - x2) ** 2 / 8.0
            - (x1 + x2 + 2.0) ** 2 / 16.0)


def lambda_gaussian(kappa: float, beta: float, nu1: float, nu2: float) -> float:
    """Closed-form coefficient ``int gamma_kappa(w) fhat(w-nu1) fhat(w-nu2) dw``.

    Equals ``2 pi sqrt((2-1/kappa^2)/2) * exp(-kappa^2 (beta nu1 - beta nu2)^2
    / 8) * exp(-(beta nu1 + beta nu2 + 2)^2 / 16)``; the Gauss-Hermite route
    in ``build_gaussian_generator_quadrature`` validates this identity.
    """
    return float(np.exp(log_lambda_gaussian(kappa, beta, nu1, nu2)))


def sampling_density(kappa: float, beta: float, omega) -> np.ndarray:
    """Normalized frequency density ``g`` matching ``gamma_kappa``:
    Gaussian with mean ``-1/beta`` and standard deviation
    ``sqrt(2 - 1/kappa^2)/beta``."""
    _check_kappa(kappa)
    s = np.sqrt(2.0 - 1.0 / kappa ** 2)
    return beta / (s * np.sqrt(2 * np.pi)) * np.exp(
        -((beta * np.asarray(omega) + 1.0) ** 2) / (2 * s ** 2))


def gamma_ri(kappa: float, beta: float, omega) -> np.ndarray:
    """Rate function of the repeated-interaction limit,
    ``(g(omega) + g(-omega)) / (1 + e^{beta omega})``; satisfies the KMS
    condition ``gamma(-omega) = e^{beta omega} gamma(omega)`` identically."""
    omega = np.asarray(omega, dtype=float)
    g_sum = sampling_density(kappa, beta, omega) + sampling_density(kappa, beta, -omega)
    return g_sum * expit(-beta * omega)


# ---------- generator container ----------

@dataclass
class CoeffTable:
    """Per-jump coefficient matrices over that jump's Bohr frequencies."""
    beta: float
    labels: list
    freqs: dict = field(default_factory=dict)     # label -> ascending ndarray
    tables: dict = field(default_factory=dict)    # label -> (n_nu, n_nu) ndarray

    def max_offdiag(self) -> float:
        worst = 0.0
        for lab in self.labels:
            t = np.abs(self.tables[lab].copy())
            np.fill_diagonal(t, 0.0)
            if t.size:
                worst = max(worst, float(t.max()))
        return worst

    def kms_residual(self) -> float:
        """Max violation of ``Lambda_{n1,n2} = conj(Lambda)_{-n1,-n2}
        e^{-beta(n1+n2)/2}`` over all jumps and representable pairs."""
        worst = 0.0
        for lab in self.labels:
            nu = self.freqs[lab]
            t = self.tables[lab]
            n = len(nu)
            for i in range(n):
                for j in range(n):
                    i_m = int(np.argmin(np.abs(nu + nu[i])))
                    j_m = int(np.argmin(np.abs(nu + nu[j])))
                    rhs = np.conj(t[i_m, j_m]) * np.exp(-self.beta * (nu[i] + nu[j]) / 2)
                    scale = max(abs(t[i, j]), abs(rhs), 1.0)
                    worst = max(worst, abs(t[i, j] - rhs) / scale)
        return worst


@dataclass
class Generator:
    superop: SuperOp              # Schrodinger picture, coherent part included
    coherent: np.ndarray          # the operator B of -i[B, rho]
    coeffs: CoeffTable
    hamiltonian: Hamiltonian
    gibbs: GibbsState
    bohr: dict                    # label -> BohrDecomposition
    family: str
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    def max_abs_freq(self) -> float:
        return max((float(np.max(np.abs(b.frequencies))) if len(b.frequencies) else 0.0)
                   for b in self.bohr.values())


def _assemble(ham: Hamiltonian, jumps: JumpSet, beta: float, lam_fn,
              with_coherent: bool, family: str, params: dict) -> Generator:
    """Shared skeleton: Bohr-decompose each jump, fill its table via
    ``lam_fn(label, freqs) -> (n, n) matrix``, accumulate dissipator and
    coherent part."""
    d = ham.dim
    gibbs = gibbs_state(ham, beta)
    coeffs = CoeffTable(beta=beta, labels=list(jumps.labels))
    bohr: dict = {}
    total = np.zeros((d * d, d * d), dtype=complex)
    b_op = np.zeros((d, d), dtype=complex)
    for op, label in zip(jumps.ops, jumps.labels):
        dec = bohr_decompose(ham, op)
        nu = dec.frequencies
        table = np.asarray(lam_fn(label, nu), dtype=complex)
        low = float(np.min(np.linalg.eigvalsh(0.5 * (table + dag(table)))))
        if low < COEFF_PSD_TOL * max(1.0, float(np.max(np.abs(table))) if table.size else 1.0):
            raise NonPositiveCoeffMatrix(
                f"coefficient matrix for jump {label} has eigenvalue {low:.3e}")
        bohr[label] = dec
        coeffs.freqs[label] = nu
        coeffs.tables[label] = table
        total += gkls_bilinear(dec.components, table)
        if with_coherent:
            for i in range(len(nu)):
                for j in range(len(nu)):
                    lam = table[i, j]
                    if lam == 0.0:
                        continue
                    w = np.tanh(-beta * (nu[i] - nu[j]) / 4.0) / 2.0
                    b_op += -1j * w * lam * (dag(dec.components[j]) @ dec.components[i])
    if with_coherent:
        b_op = 0.5 * (b_op + dag(b_op))   # Hermitian up to roundoff by symmetry
        total += ham_superop(b_op)
    return Generator(superop=SuperOp(total, "schrodinger"), coherent=b_op,
                     coeffs=coeffs, hamiltonian=ham, gibbs=gibbs, bohr=bohr,
                     family=family, params=dict(params))


# ---------- Gaussian family ----------

def build_gaussian_generator(ham: Hamiltonian, jumps: JumpSet, kappa: float,
                             beta: float, with_coherent: bool = True) -> Generator:
    _check_kappa(kappa)

    def lam_fn(label, nu):
        return np.array([[lambda_gaussian(kappa, beta, n1, n2) for n2 in nu] for n1 in nu])

    return _assemble(ham, jumps, beta, lam_fn, with_coherent, "gaussian",
                     {"kappa": kappa, "beta": beta, "with_coherent": with_coherent})


def build_gaussian_generator_quadrature(ham: Hamiltonian, jumps: JumpSet,
                                        kappa: float, beta: float,
                                        n_nodes: int = 96,
                                        with_coherent: bool = True) -> Generator:
    """Gaussian-family generator with numerically integrated coefficients.

    Integrates ``gamma_kappa(w) fhat(w - nu1) fhat(w - nu2)`` entry by entry:
    a coarse scan over the union of the factor supports locates where the
    integrand actually lives, then Gauss-Legendre with ``n_nodes`` points on
    that interval does the work.  Independent of the closed form on purpose —
    this is the oracle that pins ``lambda_gaussian``.  Node doubling must
    leave every entry within 1e-6 relative, else ``QuadratureDivergence``.
    """
    _check_kappa(kappa)
    if n_nodes < 16:
        raise InvalidSpec("need at least 16 quadrature nodes")
    s = np.sqrt(2.0 - 1.0 / kappa ** 2)
    sigma_weight = s / beta          # width of gamma_kappa around -1/beta
    sigma_filter = 1.0 / (kappa * beta)  # width of the filter product

    def integrand(w, nu1, nu2):
        return (gamma_kappa(kappa, beta, w)
                * fhat_kappa(kappa, beta, w - nu1)
                * fhat_kappa(kappa, beta, w - nu2))

    def entry(nu1, nu2):
        c_w, c_f = -1.0 / beta, 0.5 * (nu1 + nu2)
        lo = min(c_w - 9 * sigma_weight, c_f - 9 * sigma_filter)
        hi = max(c_w + 9 * sigma_weight, c_f + 9 * sigma_filter)
        scan = np.linspace(lo, hi, 1025)
        vals = integrand(scan, nu1, nu2)
        peak = float(vals.max())
        if peak == 0.0:
            return 0.0, 0.0
        live = np.nonzero(vals > peak * 1e-25)[0]
        pad = scan[1] - scan[0]
        a, b = scan[live[0]] - 2 * pad, scan[live[-1]] + 2 * pad

        def gl(n):
            x, w = np.polynomial.legendre.leggauss(n)
            pts = 0.5 * (b - a) * x + 0.5 * (b + a)
            return 0.5 * (b - a) * float(w @ integrand(pts, nu1, nu2))

        return gl(n_nodes), gl(2 * n_nodes)

    def lam_fn(label, nu):
        n = len(nu)
        t1 = np.zeros((n, n))
        t2 = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                v1, v2 = entry(nu[i], nu[j])
                t1[i, j] = t1[j, i] = v1
                t2[i, j] = t2[j, i] = v2
        scale = max(float(np.max(np.abs(t2))), 1e-300)
        if float(np.max(np.abs(t1 - t2))) / scale > 1e-6:
            raise QuadratureDivergence(
                f"quadrature table not converged at {n_nodes} nodes for jump {label}")
        return t2

    return _assemble(ham, jumps, beta, lam_fn, with_coherent, "gaussian_quadrature",
                     {"kappa": kappa, "beta": beta, "n_nodes": n_nodes,
                      "with_coherent": with_coherent})


# ---------- macroscopic-bath family ----------

@dataclass
class BathSpec:
    beta: float
    grid: np.ndarray              # symmetric frequency grid
    ghat_values: np.ndarray       # ghat on the grid (real, positive)
    gamma_a: float                # (int |g(t)| dt)^2 for one bath copy
    tau_a: float                  # int |t||g| / int |g|
    kind: str = "gaussian_default"
    params: dict = field(default_factory=dict)

    def ghat(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self.kind == "gaussian_default":
            g0 = self.params["gamma0"]
            sc = self.params["sigma_c"]
            return np.sqrt(g0) * np.exp(-omega ** 2 / (4 * sc ** 2)) * np.exp(-self.beta * omega / 4)
        return np.interp(omega, self.grid, self.ghat_values)


def bath_make(beta: float, gamma0: float, sigma_c: float, omega_max: float,
              ghat_fn=None, kind: str = "gaussian_default") -> BathSpec:
    """Tabulate a bath function and measure its correlation scales.

    The grid spans ``+-(omega_max + 8 sigma_c)`` at step ``sigma_c / 32``.
    The default family is ``ghat(w) = sqrt(gamma0) exp(-w^2/(4 sigma_c^2))
    exp(-beta w / 4)``, which carries the KMS tilt ``ghat(nu) =
    ghat(-nu) e^{-beta nu / 2}`` exactly; custom functions are checked for it
    on the grid (1e-10 relative).  ``g(t)`` is synthesized from the tabulated
    transform and ``Gamma_a = (int |g|)^2``, ``tau_a = int |t||g| / int |g|``
    are trapezoid integrals — no closed form is assumed.
    """
    if gamma0 <= 0 or sigma_c <= 0:
        raise InvalidSpec("bath needs gamma0 > 0 and sigma_c > 0")
    half = omega_max + 8.0 * sigma_c
    step = sigma_c / 32.0
    n = int(np.ceil(half / step))
    grid = np.arange(-n, n + 1) * step
    if ghat_fn is None:
        ghat_fn = lambda w: (np.sqrt(gamma0) * np.exp(-np.asarray(w) ** 2 / (4 * sigma_c ** 2))
                             * np.exp(-beta * np.asarray(w) / 4))
        kind = "gaussian_default"
    vals = np.asarray(ghat_fn(grid), dtype=float)
    if np.any(vals < 0):
        raise InvalidSpec("ghat must be nonnegative")

    tilt = vals[::-1] * np.exp(-beta * grid / 2)       # ghat(-w) e^{-beta w/2}
    scale = np.maximum(np.abs(vals), np.max(vals) * 1e-6)
    if float(np.max(np.abs(vals - tilt) / scale)) > 1e-10:
        raise KMSViolation("bath function fails ghat(nu) = ghat(-nu) e^{-beta nu/2}")

    # time-domain synthesis: g(t) = (1/2pi) int ghat(w) e^{iwt} dw
    t_half = 12.0 / sigma_c
    t_step = min(1.0 / (32.0 * sigma_c), np.pi / (4.0 * grid[-1]))
    nt = int(np.ceil(t_half / t_step))
    t = np.arange(-nt, nt + 1) * t_step
    phases = np.exp(1j * np.outer(t, grid))
    g_t = phases @ vals * (step / (2 * np.pi))
    abs_g = np.abs(g_t)
    int_abs = float(np.trapezoid(abs_g, t))
    int_t_abs = float(np.trapezoid(np.abs(t) * abs_g, t))
    gamma_a = int_abs ** 2
    tau_a = int_t_abs / int_abs
    return BathSpec(beta=beta, grid=grid, ghat_values=vals, gamma_a=gamma_a,
                    tau_a=tau_a, kind=kind,
                    params={"gamma0": gamma0, "sigma_c": sigma_c})


def observation_time(alpha: float, gamma_total: float, tau: float) -> float:
    """``T(alpha) = sqrt(2 + 3 Gamma tau) / (2 alpha Gamma)``."""
    if alpha <= 0 or gamma_total <= 0:
        raise InvalidSpec("observation_time needs alpha > 0 and Gamma > 0")
    return float(np.sqrt(2.0 + 3.0 * gamma_total * tau) / (2.0 * alpha * gamma_total))


def build_mb_generator(ham: Hamiltonian, jumps: JumpSet, bath: BathSpec,
                       alpha: float, with_coherent: bool = True) -> Generator:
    """Macroscopic-bath generator at coupling ``alpha``.

    ``Lambda_{nu1,nu2} = exp(-(T(alpha) (nu1 - nu2))^2 / 4) ghat(nu1) ghat(nu2)``
    with ``T(alpha)`` from the summed correlation scales ``Gamma = sum_a
    Gamma_a`` of the identical per-jump baths.  The diagonal is exactly
    ``ghat(nu)^2`` at every coupling, which is the Davies rate this family
    collapses to as ``alpha -> 0``.
    """
    n_jumps = len(jumps)
    gamma_tot = n_jumps * bath.gamma_a
    t_obs = observation_time(alpha, gamma_tot, bath.tau_a)
    reach = float(bath.grid[-1])

    def lam_fn(label, nu):
        if np.max(np.abs(nu)) > reach:
            raise FrequencyOutOfBathRange(
                f"Bohr frequency {np.max(np.abs(nu)):.3f} beyond bath grid {reach:.3f}")
        gh = bath.ghat(nu)
        gauss = np.exp(-(t_obs * (nu[:, None] - nu[None, :])) ** 2 / 4.0)
        return gauss * np.outer(gh, gh)

    return _assemble(ham, jumps, bath.beta, lam_fn, with_coherent, "macroscopic_bath",
                     {"alpha": alpha, "t_obs": t_obs, "gamma_total": gamma_tot,
                      "tau": bath.tau_a, "bath_kind": bath.kind,
                      "with_coherent": with_coherent, **bath.params})


# ---------- Davies family ----------

def davies_gamma_default(beta: float):
    """Reference Davies rate ``exp(-(beta nu + 1)^2 / 4)`` (KMS exactly)."""
    return lambda nu: np.exp(-((beta * np.asarray(nu) + 1.0) ** 2) / 4.0)


def build_davies(ham: Hamiltonian, jumps: JumpSet, beta: float,
                 gamma_fn=None) -> Generator:
    """Davies generator: diagonal coefficient table, no coherent part.

    Precondition (checked, 1e-10 relative): ``gamma(-nu) = e^{beta nu}
    gamma(nu)`` at every Bohr frequency of every jump — this is exactly what
    makes the Gibbs state stationary for a diagonal table.
    """
    if gamma_fn is None:
        gamma_fn = davies_gamma_default(beta)

    def lam_fn(label, nu):
        g_plus = np.asarray(gamma_fn(nu), dtype=float)
        g_minus = np.asarray(gamma_fn(-nu), dtype=float)
        rhs = np.exp(beta * nu) * g_plus
        scale = np.maximum(np.maximum(np.abs(g_minus), np.abs(rhs)), 1e-300)
        worst = float(np.max(np.abs(g_minus - rhs) / scale))
        if worst > 1e-10:
            raise KMSConditionViolation(
                f"gamma(-nu) != e^(beta nu) gamma(nu) (residual {worst:.3e})")
        return np.diag(g_plus)

    return _assemble(ham, jumps, beta, lam_fn, False, "davies", {"beta": beta})


# ---------- repeated-interaction effective generator ----------

def ri_effective_generator(ham: Hamiltonian, jumps: JumpSet, kappa: float,
                           beta: float, with_coherent: bool = True) -> Generator:
    """The Gaussian-family generator scaled by the repeated-interaction rate
    ``J = beta / (||A||_G sqrt(2 pi (2 - 1/kappa^2)))`` — the generator whose
    ``alpha^2``-semigroup the averaged interaction channel approximates.
    Scaling is exact, so gaps scale by exactly ``J``."""
    gen = build_gaussian_generator(ham, jumps, kappa, beta, with_coherent)
    s2 = 2.0 - 1.0 / kappa ** 2
    j_rate = beta / (jumps.norm_g * np.sqrt(2 * np.pi * s2))
    scaled = CoeffTable(beta=beta, labels=gen.coeffs.labels,
                        freqs=dict(gen.coeffs.freqs),
                        tables={k: j_rate * v for k, v in gen.coeffs.tables.items()})
    return Generator(superop=SuperOp(j_rate * gen.superop.matrix, "schrodinger"),
                     coherent=j_rate * gen.coherent, coeffs=scaled,
                     hamiltonian=ham, gibbs=gen.gibbs, bohr=gen.bohr,
                     family="ri_effective",
                     params={"kappa": kappa, "beta": beta, "j_rate": j_rate,
                             "with_coherent": with_coherent})


# ---------- serialization ----------

def superop_entries(matrix: np.ndarray, threshold: float = 0.0) -> list:
    """Nonzero entries as ``(row, col, re, im)`` with 17 significant digits."""
    out = []
    mat = np.asarray(matrix)
    rows, cols = np.nonzero(np.abs(mat) > threshold)
    for r, c in zip(rows.tolist(), cols.tolist()):
        z = mat[r, c]
        out.append((r, c, format(float(z.real), ".17g"), format(float(z.imag), ".17g")))
    return out


def generator_to_dict(gen: Generator) -> dict:
    return {
        "family": gen.family,
        "dim": gen.dim,
        "beta": format(gen.coeffs.beta, ".17g"),
        "params": {k: (format(v, ".17g") if isinstance(v, float) else v)
                   for k, v in sorted(gen.params.items())},
        "superop": superop_entries(gen.superop.matrix),
        "coherent": superop_entries(gen.coherent),
    }


def generator_dump(gen: Generator, path) -> None:
    with open(path, "w") as fh:
        json.dump(generator_to_dict(gen), fh, indent=0, sort_keys=True)
        fh.write("\n")


def generator_load(path) -> dict:
    """Load a dumped generator back into dense arrays for comparison."""
    with open(path) as fh:
        data = json.load(fh)
    d2 = data["dim"] ** 2
    sup = np.zeros((d2, d2), dtype=complex)
    for r, c, re, im in data["superop"]:
        sup[r, c] = float(re) + 1j * float(im)
    coh = np.zeros((data["dim"], data["dim"]), dtype=complex)
    for r, c, re, im in data["coherent"]:
        coh[r, c] = float(re) + 1j * float(im)
    data["superop"] = sup
    data["coherent"] = coh
    return data
