"""KMS geometry, Dirichlet forms, gaps, entropy functionals, and bounds.

The KMS inner product used throughout is

    <X, Y>_rho = Tr[rho^{1/2} Y^dag rho^{1/2} X]

(linear in ``X``, conjugate-linear in ``Y``).  In vec coordinates it is
``vec(Y)^dag G vec(X)`` with Gram matrix ``G = kron(conj(rho^{1/2}),
rho^{1/2})``, so symmetry checks and Dirichlet forms reduce to dense matrix
identities; since the vec images of the matrix units are exactly the standard
basis vectors, "max over all matrix-unit probe pairs" is the entrywise max of
one matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import quad

from .errors import InvalidSpec, NotDetailedBalanced, SingularState
from .generators import CoeffTable, Generator
from .models import GibbsState
from .numlin import (
    SuperOp,
    dag,
    frac_power,
    kms_hermitize,
    kms_weight,
    trace_norm,
    unvec,
    vec,
)

# the closed-form Dirichlet kernel below carries an explicit 1/2: the
# commutator-coefficient form as quoted evaluates to exactly twice the direct
# form -<X, L X>_rho on every probe, so the factor is pinned here once
DIRICHLET_CLOSED_PREFACTOR = 0.5


# ---------- inner product and symmetry residual ----------

def kms_inner(x: np.ndarray, y: np.ndarray, rho: np.ndarray) -> complex:
    """``Tr[rho^{1/2} Y^dag rho^{1/2} X]`` for full-rank ``rho``."""
    evals = np.linalg.eigvalsh(rho)
    if evals[0] <= 0.0:
        raise SingularState("kms_inner needs a full-rank state")
    rh = frac_power(rho, 0.5)
    return complex(np.trace(rh @ dag(y) @ rh @ x))


def kms_symmetry_residual(lind, rho: np.ndarray) -> float:
    """Max over all matrix-unit probe pairs of the symmetry defect
    ``|<Y, L X> - <L Y, X>|``, normalized by the spectral norm of ``L``.

    Works for any object exposing a Schrodinger superoperator (a
    ``Generator`` or a ``SuperOp``).
    """
    sop = lind.superop if isinstance(lind, Generator) else lind
    lheis = sop.to_heisenberg().matrix
    rh = frac_power(rho, 0.5)
    gram = np.kron(np.conj(rh), rh)
    defect = dag(lheis) @ gram - gram @ lheis
    scale = np.linalg.norm(sop.matrix, 2)
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(defect)) / scale)


def fixed_point_residual(lind, rho: np.ndarray) -> float:
    sop = lind.superop if isinstance(lind, Generator) else lind
    return trace_norm(sop(rho))


# ---------- Dirichlet forms ----------

def dirichlet_direct(lind, rho: np.ndarray, x: np.ndarray) -> float:
    """``E(X) = -<X, L X>_rho`` through the Heisenberg generator."""
    sop = lind.superop if isinstance(lind, Generator) else lind
    lx = unvec(sop.to_heisenberg().matrix @ vec(x))
    val = -kms_inner(lx, x, rho)
    return float(val.real)


def dirichlet_closed(coeffs: CoeffTable, bohr: dict, rho: np.ndarray,
                     x: np.ndarray) -> float:
    """Commutator form of the Dirichlet energy.

    ``E(X) = 1/2 sum_a sum_{nu1,nu2} Lambda^a_{nu1,nu2}
    e^{beta(nu1+nu2)/4} / cosh(beta(nu1-nu2)/4)
    <[A^a_{nu1}, X], [A^a_{nu2}, X]>_rho``

    The leading 1/2 (``DIRICHLET_CLOSED_PREFACTOR``) makes this agree with
    ``dirichlet_direct`` to machine precision; without it the two routes
    differ by exactly a factor of two on every probe.
    """
    beta = coeffs.beta
    total = 0.0 + 0.0j
    for lab in coeffs.labels:
        nu = coeffs.freqs[lab]
        table = coeffs.tables[lab]
        comps = bohr[lab].components
        comm = [c @ x - x @ c for c in comps]
        for i in range(len(nu)):
            for j in range(len(nu)):
                lam = table[i, j]
                if lam == 0.0:
                    continue
                weight = (np.exp(beta * (nu[i] + nu[j]) / 4.0)
                          / np.cosh(beta * (nu[i] - nu[j]) / 4.0))
                total += lam * weight * kms_inner(comm[i], comm[j], rho)
    return float((DIRICHLET_CLOSED_PREFACTOR * total).real)


# ---------- spectral gap ----------

@dataclass
class GapResult:
    gap: float
    zero_multiplicity: int
    spectrum: np.ndarray
    method: str             # "hermitized" | "general"
    residual: float = 0.0   # hermitization residual that chose the method

    @property
    def primitive(self) -> bool:
        return self.zero_multiplicity == 1


def spectral_gap(gen: Generator) -> GapResult:
    """Smallest nonzero eigenvalue magnitude of the generator.

    KMS-symmetric generators go through the Hermitian frame (exact real
    spectrum); if the hermitization residual is above threshold the dense
    nonsymmetric eigensolver is used instead and the method is reported as
    ``"general"``.  A degenerate zero eigenvalue is reported through
    ``zero_multiplicity`` (non-fatal: sweeps must be able to continue).
    """
    rho = gen.gibbs.rho
    try:
        res = kms_hermitize(gen.superop, rho)
        spectrum = res.spectrum
        zero_thr = res.zero_threshold
        zero_mult = int(np.sum(np.abs(spectrum) < zero_thr))
        nonzero = spectrum[np.abs(spectrum) >= zero_thr]
        gap = float(np.min(np.abs(nonzero))) if nonzero.size else 0.0
        return GapResult(gap=gap, zero_multiplicity=zero_mult,
                         spectrum=spectrum, method="hermitized",
                         residual=res.residual)
    except NotDetailedBalanced:
        pass
    # general route: gap is the slowest decay rate -Re(lambda); zero modes
    # are counted by |lambda|, so undamped oscillations are not zeros (they
    # show up as gap == 0 instead)
    eigs = np.linalg.eigvals(gen.superop.matrix)
    zero_thr = 1e-9 * float(np.max(np.abs(eigs))) if eigs.size else 0.0
    zero_mult = int(np.sum(np.abs(eigs) < zero_thr))
    nonzero = eigs[np.abs(eigs) >= zero_thr]
    gap = float(max(0.0, np.min(-nonzero.real))) if nonzero.size else 0.0
    return GapResult(gap=gap, zero_multiplicity=zero_mult,
                     spectrum=np.sort(eigs.real), method="general",
                     residual=float("nan"))


def rayleigh_gap_probe(gen: Generator, n_restarts: int = 500,
                       seed: int = 0) -> float:
    """Best (smallest) Rayleigh quotient ``E(X) / ||X - <I,X> I||_rho^2``
    over random Hermitian probes.  Every quotient upper-bounds the gap, so
    the minimum over restarts must stay >= gap - 1e-6; it is a cross-check,
    not the gap algorithm."""
    rho = gen.gibbs.rho
    d = gen.dim
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(n_restarts):
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x = 0.5 * (x + dag(x))
        x = x - kms_inner(x, np.eye(d), rho) * np.eye(d)   # <I, X> I removed
        norm2 = kms_inner(x, x, rho).real
        if norm2 < 1e-14:
            continue
        best = min(best, dirichlet_direct(gen, rho, x) / norm2)
    return float(best)


# ---------- mixing ----------

def _propagator_factory(gen: Generator) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return sigma(t) evaluator.  KMS route: ``e^{tL} = W e^{tM} W^{-1}``
    with ``M`` Hermitian, diagonalized once — stable for any t >= 0."""
    rho = gen.gibbs.rho
    res = kms_hermitize(gen.superop, rho, require=False)
    if res.residual < 1e-8:
        w, winv = kms_weight(rho)
        evals, evecs = np.linalg.eigh(res.matrix)
        left = w @ evecs
        right = dag(evecs) @ winv

        def evolve(t, sigma):
            prop = (left * np.exp(np.minimum(t * evals, 50.0))) @ right
            return unvec(prop @ vec(sigma))
    else:
        evals, evecs = np.linalg.eig(gen.superop.matrix)
        vinv = np.linalg.inv(evecs)

        def evolve(t, sigma):
            prop = (evecs * np.exp(t * evals)) @ vinv
            return unvec(prop @ vec(sigma))
    return evolve


def semigroup_evolver(gen: Generator) -> Callable[[float, np.ndarray], np.ndarray]:
    """Public handle on the one-time-diagonalized propagator: returns
    ``(t, sigma) -> e^{tL} sigma``, reusable across many times and states."""
    return _propagator_factory(gen)


def mixing_curve(gen: Generator, sigma0: np.ndarray, t_grid) -> list:
    """``[(t, ||e^{tL} sigma0 - rho_beta||_1)]`` along the grid."""
    evolve = _propagator_factory(gen)
    rho = gen.gibbs.rho
    out = []
    for t in np.asarray(t_grid, dtype=float):
        out.append((float(t), trace_norm(evolve(t, sigma0) - rho)))
    return out


def kms_deviation_curve(gen: Generator, sigma0: np.ndarray, t_grid) -> list:
    """Deviation in the KMS-weighted 2-norm ``||rho^{-1/4} (sigma_t - rho)
    rho^{-1/4}||_F`` — the quantity that contracts monotonically under a
    KMS-symmetric semigroup (the trace-norm curve is bounded by it)."""
    evolve = _propagator_factory(gen)
    rho = gen.gibbs.rho
    rqi = frac_power(rho, -0.25)
    out = []
    for t in np.asarray(t_grid, dtype=float):
        dev = rqi @ (evolve(t, sigma0) - rho) @ rqi
        out.append((float(t), float(np.linalg.norm(dev))))
    return out


class MixingCheck(NamedTuple):
    ok: bool
    ts: np.ndarray
    curve: np.ndarray
    bound: np.ndarray

    def __bool__(self) -> bool:  # usable directly as the flag
        return self.ok


def mixing_bound_check(gen: Generator, sigma0: np.ndarray, t_grid) -> MixingCheck:
    """Check ``||e^{tL} sigma0 - rho||_1 <= 2 e^{-gap t} ||rho^{-1}||`` on the
    grid.  The bound is evaluated in log space so large ``||rho^{-1}||`` never
    overflows."""
    pairs = mixing_curve(gen, sigma0, t_grid)
    gap = spectral_gap(gen).gap
    ts = np.array([p[0] for p in pairs])
    curve = np.array([p[1] for p in pairs])
    log_bound = math.log(2.0) + gen.gibbs.log_inv_norm - gap * ts
    bound = np.exp(np.minimum(log_bound, 700.0))
    ok = bool(np.all(curve <= bound + 1e-12))
    return MixingCheck(ok=ok, ts=ts, curve=curve, bound=bound)


# ---------- entropy functionals ----------

def _log_gibbs(gen: Generator) -> np.ndarray:
    # exact: log rho_beta = -beta H - log Z, stable at any beta
    g = gen.gibbs
    return (-g.beta) * gen.hamiltonian.matrix - g.log_z * np.eye(gen.dim)


def _regularize(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    d = sigma.shape[0]
    low = float(np.min(np.linalg.eigvalsh(0.5 * (sigma + dag(sigma)))))
    if low < -1e-10:
        raise SingularState(f"probe has eigenvalue {low:.3e} < -1e-10")
    eps = 1e-12
    return (0.5 * (sigma + dag(sigma)) + eps * np.eye(d) / d) / (1.0 + eps)


def entropy_functionals(gen: Generator, sigma: np.ndarray) -> tuple[float, float]:
    """Relative entropy to the Gibbs state and entropy production rate:

    ``D = Tr[sigma (log sigma - log rho)]``,
    ``EP = -Tr[L(sigma) (log sigma - log rho)] = -dD/dt`` along the semigroup.
    """
    sig = _regularize(sigma)
    evals, evecs = np.linalg.eigh(sig)
    log_sig = (evecs * np.log(np.clip(evals, 1e-300, None))) @ dag(evecs)
    grad = log_sig - _log_gibbs(gen)
    d_rel = float(np.trace(sig @ grad).real)
    ep = float(-np.trace(gen.superop(sig) @ grad).real)
    return d_rel, ep


# ---------- probe state samplers ----------

def hs_random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def gibbs_perturbation_state(gibbs: GibbsState, rng: np.random.Generator,
                             eps: float = 0.05) -> np.ndarray:
    d = gibbs.dim
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.5 * (h + dag(h))
    h -= np.trace(h) / d * np.eye(d)
    sigma = gibbs.rho + eps * h / max(np.linalg.norm(h), 1e-300)
    evals, evecs = np.linalg.eigh(sigma)
    evals = np.clip(evals, 1e-14, None)      # project back to PSD
    sigma = (evecs * evals) @ dag(evecs)
    return sigma / np.trace(sigma).real


def low_rank_smoothed_state(dim: int, rng: np.random.Generator,
                            eta: float = 1e-3) -> np.ndarray:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    return (1.0 - eta) * np.outer(psi, psi.conj()) + eta * np.eye(dim) / dim


# ---------- MLSI ----------

def mlsi_probes(gen: Generator, n_probes: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    d = gen.dim
    probes = []
    n_hs = n_probes // 2
    n_near = n_probes // 4
    for _ in range(n_hs):
        probes.append(hs_random_state(d, rng))
    for _ in range(n_near):
        probes.append(gibbs_perturbation_state(gen.gibbs, rng))
    while len(probes) < n_probes:
        probes.append(low_rank_smoothed_state(d, rng))
    return probes


def mlsi_estimate(gen: Generator, n_probes: int = 200, seed: int = 0) -> float:
    """Sampled ``inf EP(sigma) / D(sigma || rho)``.

    This is an upper bound on the true modified-log-Sobolev constant (an
    infimum sampled at finitely many states) and is reported as such; decay
    checks downstream use ``estimate / 2``.  Probes mix Hilbert-Schmidt-
    uniform states, near-Gibbs perturbations, and smoothed near-pure states,
    and each probe contributes its semigroup trajectory at a few gap-scaled
    times as well — trajectories drift onto the slow eigen-mode, where the
    ratio approaches its infimum, so static sampling alone overestimates
    badly.  Trajectory points whose relative entropy has decayed into the
    regularization floor are excluded.
    """
    if n_probes < 100:
        raise InvalidSpec("mlsi_estimate needs n_probes >= 100")
    gap = spectral_gap(gen).gap
    times = [0.0] if gap <= 0 else [0.0, 0.5 / gap, 1.0 / gap, 2.0 / gap,
                                    4.0 / gap]
    evolve = _propagator_factory(gen)
    best = np.inf
    for sigma in mlsi_probes(gen, n_probes, seed):
        for t in times:
            d_rel, ep = entropy_functionals(gen, evolve(t, sigma))
            if d_rel > 1e-9:
                best = min(best, ep / d_rel)
    return float(best)


def entropy_decay_check(gen: Generator, rate: float, probes,
                        t_grid) -> bool:
    """True iff ``D(e^{tL} sigma) <= e^{-rate t} D(sigma)`` for every probe
    at every grid time (up to 1e-9 absolute slack)."""
    evolve = _propagator_factory(gen)
    for sigma in probes:
        d0, _ = entropy_functionals(gen, sigma)
        for t in np.asarray(t_grid, dtype=float):
            dt_val, _ = entropy_functionals(gen, evolve(t, sigma))
            if dt_val > np.exp(-rate * t) * d0 + 1e-9:
                return False
    return True


# ---------- monotonicity sweeps ----------

@dataclass
class SweepReport:
    family: str
    param_name: str            # "kappa" or "alpha"
    grid: list
    gaps: list
    zero_mults: list
    kms_residuals: list
    fixedpoint_residuals: list
    monotonic: bool
    direction: str             # "nondecreasing" | "nonincreasing"
    metadata: dict = field(default_factory=dict)

    def rows(self) -> list:
        return [
            {"param": p, "gap": g, "zero_mult": z, "kms_residual": k,
             "fixedpoint_residual": f}
            for p, g, z, k, f in zip(self.grid, self.gaps, self.zero_mults,
                                     self.kms_residuals,
                                     self.fixedpoint_residuals)
        ]


MONOTONE_TOL = 1e-8


def _monotone(gaps, direction: str, tol: float = MONOTONE_TOL) -> bool:
    diffs = np.diff(np.asarray(gaps, dtype=float))
    if direction == "nondecreasing":
        return bool(np.all(diffs >= -tol))
    return bool(np.all(diffs <= tol))


def monotonicity_sweep(family: str, ham, jumps, beta: float, grid,
                       bath=None, metadata: dict | None = None) -> SweepReport:
    """Gap sweep along a parameter grid with the direction the theory demands:
    Gaussian gaps are nondecreasing in ``kappa``, macroscopic-bath gaps are
    nonincreasing in ``alpha``."""
    from . import generators as gn   # local import to avoid cycles

    grid = [float(g) for g in grid]
    if sorted(grid) != grid:
        raise InvalidSpec("grid must be sorted ascending")
    if family == "gaussian":
        build = lambda p: gn.build_gaussian_generator(ham, jumps, p, beta)
        direction, pname = "nondecreasing", "kappa"
    elif family == "macroscopic_bath":
        if bath is None:
            raise InvalidSpec("macroscopic_bath sweep needs a bath")
        build = lambda p: gn.build_mb_generator(ham, jumps, bath, p)
        direction, pname = "nonincreasing", "alpha"
    else:
        raise InvalidSpec(f"unknown sweep family {family!r}")

    gaps, zmults, kres, fres = [], [], [], []
    for p in grid:
        gen = build(p)
        rho = gen.gibbs.rho
        gr = spectral_gap(gen)
        gaps.append(gr.gap)
        zmults.append(gr.zero_multiplicity)
        kres.append(kms_symmetry_residual(gen, rho))
        fres.append(fixed_point_residual(gen, rho))
    return SweepReport(family=family, param_name=pname, grid=grid, gaps=gaps,
                       zero_mults=zmults, kms_residuals=kres,
                       fixedpoint_residuals=fres,
                       monotonic=_monotone(gaps, direction),
                       direction=direction, metadata=dict(metadata or {}))


# ---------- Gaussian convolution identity ----------

def f_delta(delta: float, s) -> np.ndarray:
    """Probability density ``delta sqrt(2/pi) exp(-2 delta^2 s^2)``."""
    return delta * np.sqrt(2 / np.pi) * np.exp(-2.0 * delta ** 2 * np.asarray(s) ** 2)


def g_delta(delta: float, delta_prime: float, s) -> np.ndarray:
    dd = delta ** 2 * delta_prime ** 2
    gap2 = delta_prime ** 2 - delta ** 2
    return (delta * delta_prime / np.sqrt(gap2)) * np.sqrt(2 / np.pi) * np.exp(
        -2.0 * dd * np.asarray(s) ** 2 / gap2)


class ConvolutionCheck(NamedTuple):
    residual: float
    g_l1: float


def convolution_identity_check(delta: float, delta_prime: float,
                               n_points: int = 21) -> ConvolutionCheck:
    """Quadrature residual of ``g_{delta,delta'} * f_{delta'} = f_delta``.

    The convolution is evaluated by adaptive quadrature over the effective
    support of ``g`` at a grid of sample points spanning the output width;
    the second entry is ``||g||_1``, which must equal 1.
    """
    if not 0 < delta < delta_prime:
        raise InvalidSpec("need 0 < delta < delta_prime")
    sigma_g = np.sqrt(delta_prime ** 2 - delta ** 2) / (2 * delta * delta_prime)
    half = 10.0 * sigma_g
    residual = 0.0
    for s in np.linspace(-1.5 / delta, 1.5 / delta, n_points):
        conv, _ = quad(lambda u: g_delta(delta, delta_prime, u)
                       * f_delta(delta_prime, s - u), -half, half,
                       limit=300, epsabs=1e-13, epsrel=1e-12)
        residual = max(residual, abs(conv - f_delta(delta, s)))
    g_l1, _ = quad(lambda u: g_delta(delta, delta_prime, u), -half, half,
                   limit=300, epsabs=1e-13, epsrel=1e-12)
    return ConvolutionCheck(residual=float(residual), g_l1=float(g_l1))


# ---------- end-to-end triangle bound ----------

def endtoend_bound_terms(alpha: float, t: float, gamma_total: float,
                         tau: float, beta: float, lam: float,
                         log_inv_norm: float) -> tuple[float, float, float]:
    """The three terms of the thermalization triangle bound, unit prefactors:

    ``2 ||rho^{-1}|| e^{-lam alpha^2 t}``  (mixing of the ideal semigroup),
    ``alpha^3 (Gamma t) (Gamma tau + Gamma beta e^{(alpha Gamma beta)^2})``
    (accumulated per-step channel error), and ``alpha^2 Gamma beta``
    (coefficient distance of the effective generator).
    """
    if min(alpha, t, gamma_total, tau, beta, lam) < 0 or log_inv_norm < 0:
        raise InvalidSpec("endtoend_bound arguments must be nonnegative")
    term1 = 2.0 * np.exp(min(log_inv_norm - lam * alpha ** 2 * t, 700.0))
    gb = gamma_total * beta
    term2 = alpha ** 3 * (gamma_total * t) * (
        gamma_total * tau + gb * np.exp((alpha * gb) ** 2))
    term3 = alpha ** 2 * gb
    return float(term1), float(term2), float(term3)


def endtoend_bound(alpha: float, t: float, gamma_total: float, tau: float,
                   beta: float, lam: float, log_inv_norm: float) -> float:
    return float(sum(endtoend_bound_terms(alpha, t, gamma_total, tau, beta,
                                          lam, log_inv_norm)))
