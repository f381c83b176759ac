"""Batch experiment runner: config files in, delimited reports out.

Subcommands
-----------
``run <config.json>``
    Execute one experiment described by a flat JSON object.  Outputs land
    in the config's ``out_dir``: the experiment's CSV, ``summary.json``,
    and ``config_echo.json``; on an invariant violation a machine-readable
    ``violation.json`` is written next to the data before the nonzero exit.
``report <results-dir>``
    Scan a directory tree of prior runs and consolidate them into
    ``report/summary.md`` and ``report/index.json`` (slope fits with 95%
    confidence intervals where a power law applies), rendering a PNG
    figure alongside each run's CSV.
``validate``
    Execute the invariant suite (detailed-balance residuals, fixed points,
    the pinned coefficient value, the convolution identity, entropy-
    production sign, the mixing bound) and exit 0 only if every check
    passes.

Config format: one flat JSON object, no nesting.  Dimensionful keys carry
their unit in the name (``beta_inv_energy``, ``t_max_time``); model
parameters are prefixed ``model_`` (``model_kind``, ``model_n_qubits``,
...).  Any stochastic mode requires an explicit ``seed``.

Exit codes: 0 ok, 2 config error, 3 invariant violation, 4 numerical
non-convergence.

Determinism: same config + seed reproduces every output byte.  The
``KMSLAB_THREADS`` environment variable caps numerical thread pools
(default 1); it is pinned before the numerics libraries load.
"""

import os


def _pin_threads() -> None:
    n = os.environ.get("KMSLAB_THREADS", "1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, n)


_pin_threads()   # before the first numpy import in this process

import json            # noqa: E402
import sys             # noqa: E402
from pathlib import Path  # noqa: E402

import click           # noqa: E402
import numpy as np     # noqa: E402

from . import analysis as an       # noqa: E402
from . import experiments as ex    # noqa: E402
from . import generators as gn     # noqa: E402
from . import models as md         # noqa: E402
from . import reporting as rp      # noqa: E402
from . import ri_sim as ri         # noqa: E402
from .errors import (              # noqa: E402
    ConfigError,
    ConfigParseError,
    ConvergenceError,
    EmptyResults,
    ExperimentFailed,
    InvalidSpec,
    InvariantViolation,
)

KINDS = ("gap-sweep", "monotonicity", "ri-scaling", "ri-fixed-point",
         "mb-demo", "davies-compare", "mlsi", "validate")

KMS_RESIDUAL_TOL = 1e-8
FIXED_POINT_TOL = 1e-9


# ---------- config plumbing ----------

def load_config(path: Path) -> dict:
    if not path.exists():
        raise ConfigParseError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigParseError("config must be a JSON object")
    for key, value in cfg.items():
        if isinstance(value, dict):
            raise ConfigParseError(
                f"config must stay flat; key {key!r} nests an object")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigParseError(
            f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
    if "out_dir" not in cfg:
        raise ConfigParseError("config needs an out_dir")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = sorted(k for k in keys if k not in cfg)
    if missing:
        raise ConfigParseError(
            f"kind {cfg['kind']!r} needs keys: {', '.join(missing)}")


def _grid(cfg: dict, key: str) -> list:
    value = cfg.get(key)
    if not isinstance(value, list) or not value:
        raise ConfigParseError(f"{key} must be a nonempty list")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigParseError(f"{key} must contain numbers") from None


def _seed(cfg: dict) -> int:
    if "seed" not in cfg:
        raise ConfigParseError(
            f"kind {cfg['kind']!r} is stochastic and needs an explicit seed")
    return int(cfg["seed"])


def _model(cfg: dict):
    _require(cfg, "model_kind")
    spec = {"model_kind": cfg["model_kind"]}
    for key, value in cfg.items():
        if key.startswith("model_") and key != "model_kind":
            spec[key[len("model_"):]] = value
    try:
        ham = md.build_hamiltonian(spec)
    except InvalidSpec as exc:
        raise ConfigParseError(str(exc)) from None
    return ham, md.pauli_jump_set(ham.n_qubits)


def _bath(cfg: dict, beta: float) -> gn.BathSpec:
    _require(cfg, "gamma0_rate", "sigma_c_energy", "omega_max_energy")
    return gn.bath_make(beta, float(cfg["gamma0_rate"]),
                        float(cfg["sigma_c_energy"]),
                        float(cfg["omega_max_energy"]))


def _ri_config(cfg: dict, alpha: float, kappa: float | None = None,
               n_steps=None, n_nodes=None) -> ri.RIConfig:
    kwargs = dict(
        alpha=float(alpha),
        kappa=float(cfg["kappa_dimensionless"] if kappa is None else kappa),
        beta=float(cfg["beta_inv_energy"]))
    if "t_pulse_time" in cfg:
        kwargs["t_pulse"] = float(cfg["t_pulse_time"])
    n_steps = cfg.get("n_steps") if n_steps is None else n_steps
    n_nodes = cfg.get("n_nodes") if n_nodes is None else n_nodes
    if n_steps is not None:
        kwargs["n_steps"] = int(n_steps)
    if n_nodes is not None:
        kwargs["n_nodes"] = int(n_nodes)
    if cfg.get("omega_mode") == "montecarlo":
        kwargs.update(omega_mode="montecarlo", jump_mode="sampled",
                      n_samples=int(cfg.get("n_samples", 1000)),
                      seed=_seed(cfg))
    return ri.RIConfig(**kwargs)


# ---------- experiment runners ----------

def _family_rows(family: str, ham, jumps, beta: float, grid, bath):
    if family in ("gaussian", "ri_effective"):
        pname = "kappa"
        builders = {"gaussian": gn.build_gaussian_generator,
                    "ri_effective": gn.ri_effective_generator}
        build = lambda p: builders[family](ham, jumps, p, beta)
    elif family == "macroscopic_bath":
        pname = "alpha"
        build = lambda p: gn.build_mb_generator(ham, jumps, bath, p)
    elif family == "davies":
        pname = "beta"
        grid = [beta]
        build = lambda p: gn.build_davies(ham, jumps, p)
    else:
        raise ConfigParseError(f"unknown generator family {family!r}")
    rows = []
    for p in grid:
        gen = build(float(p))
        rho = gen.gibbs.rho
        gr = an.spectral_gap(gen)
        rows.append({"param": float(p), "gap": gr.gap,
                     "zero_mult": gr.zero_multiplicity,
                     "kms_residual": an.kms_symmetry_residual(gen, rho),
                     "fixedpoint_residual": an.fixed_point_residual(gen, rho)})
    return pname, rows


def _enforce_residuals(rows: list) -> None:
    bad = [r for r in rows if r["kms_residual"] > KMS_RESIDUAL_TOL
           or r["fixedpoint_residual"] > FIXED_POINT_TOL]
    if bad:
        raise ExperimentFailed(
            "generator failed the detailed-balance/fixed-point residuals",
            {"rows": bad, "kms_tol": KMS_RESIDUAL_TOL,
             "fixedpoint_tol": FIXED_POINT_TOL})


_GAP_HEADER = ["param", "gap", "zero_mult", "kms_residual",
               "fixedpoint_residual"]


def _run_gap_sweep(cfg: dict, out: Path) -> dict:
    _require(cfg, "family", "beta_inv_energy")
    family = cfg["family"]
    beta = float(cfg["beta_inv_energy"])
    ham, jumps = _model(cfg)
    bath = _bath(cfg, beta) if family == "macroscopic_bath" else None
    if family == "davies":
        grid = [beta]
    else:
        key = ("alpha_grid_dimensionless" if family == "macroscopic_bath"
               else "kappa_grid_dimensionless")
        grid = _grid(cfg, key)
    pname, rows = _family_rows(family, ham, jumps, beta, grid, bath)
    rp.write_csv(out / "gaps.csv", _GAP_HEADER, rows)
    summary = {"family": family, "param_name": pname,
               "grid": [r["param"] for r in rows],
               "gaps": [r["gap"] for r in rows],
               "worst_kms_residual": max(r["kms_residual"] for r in rows),
               "worst_fixedpoint_residual": max(r["fixedpoint_residual"]
                                                for r in rows)}
    _enforce_residuals(rows)
    return summary


def _run_monotonicity(cfg: dict, out: Path) -> dict:
    _require(cfg, "family", "beta_inv_energy")
    family = cfg["family"]
    beta = float(cfg["beta_inv_energy"])
    ham, jumps = _model(cfg)
    if family == "gaussian":
        grid, bath = _grid(cfg, "kappa_grid_dimensionless"), None
    elif family == "macroscopic_bath":
        grid, bath = _grid(cfg, "alpha_grid_dimensionless"), _bath(cfg, beta)
    else:
        raise ConfigParseError(
            "monotonicity covers the 'gaussian' and 'macroscopic_bath' "
            f"families, not {family!r}")
    rep = an.monotonicity_sweep(family, ham, jumps, beta, grid, bath=bath)
    rows = rep.rows()
    rp.write_csv(out / "gaps.csv", _GAP_HEADER, rows)
    summary = {"family": family, "param_name": rep.param_name,
               "direction": rep.direction, "monotonic": rep.monotonic,
               "grid": rep.grid, "gaps": rep.gaps}
    _enforce_residuals(rows)
    if not rep.monotonic:
        raise ExperimentFailed(
            f"gap is not {rep.direction} along the {rep.param_name} grid",
            {"grid": rep.grid, "gaps": rep.gaps})
    return summary


def _run_ri_scaling(cfg: dict, out: Path) -> dict:
    _require(cfg, "beta_inv_energy", "kappa_dimensionless",
             "alpha_grid_dimensionless")
    ham, jumps = _model(cfg)
    grid = _grid(cfg, "alpha_grid_dimensionless")
    ricfg = _ri_config(cfg, alpha=max(grid))
    rep = ri.channel_vs_semigroup(ham, jumps, ricfg, grid)
    rp.write_csv(out / "scaling.csv", ["alpha", "distance"],
                 list(zip(rep.alphas, rep.distances)))
    return {"slope": rep.slope, "intercept": rep.intercept,
            "n_probes": rep.n_probes,
            "monotone_increasing": bool(np.all(np.diff(rep.distances) > 0)),
            "kappa": ricfg.kappa, "n_steps": ricfg.resolved_n_steps,
            "n_nodes": ricfg.resolved_n_nodes}


def _run_ri_fixed_point(cfg: dict, out: Path) -> dict:
    _require(cfg, "beta_inv_energy", "alpha_dimensionless",
             "kappa_grid_dimensionless", "epsilon_dimensionless")
    ham, jumps = _model(cfg)
    grid = _grid(cfg, "kappa_grid_dimensionless")
    steps_list = cfg.get("n_steps_list") or [None] * len(grid)
    nodes_list = cfg.get("n_nodes_list") or [None] * len(grid)
    if len(steps_list) != len(grid) or len(nodes_list) != len(grid):
        raise ConfigParseError(
            "n_steps_list / n_nodes_list must align with the kappa grid")
    alpha = float(cfg["alpha_dimensionless"])
    eps = float(cfg["epsilon_dimensionless"])
    extra = ({"max_iterations": int(cfg["max_collisions"])}
             if "max_collisions" in cfg else {})
    rows = []
    for kappa, n_steps, n_nodes in zip(grid, steps_list, nodes_list):
        ricfg = _ri_config(cfg, alpha=alpha, kappa=kappa,
                           n_steps=n_steps, n_nodes=n_nodes)
        rep = ri.fixed_point_and_therm_index(ham, jumps, ricfg, epsilon=eps,
                                             **extra)
        rows.append({"kappa": kappa, "n_steps": ricfg.resolved_n_steps,
                     "n_nodes": ricfg.resolved_n_nodes,
                     "fp_error": rep.fp_error, "t_therm": rep.t_therm})
    rp.write_csv(out / "fixed_point.csv",
                 ["kappa", "n_steps", "n_nodes", "fp_error", "t_therm"],
                 rows)
    errors = [r["fp_error"] for r in rows]
    return {"kappas": grid, "fp_errors": errors,
            "t_therms": [r["t_therm"] for r in rows],
            "strictly_decreasing": bool(np.all(np.diff(errors) < 0)),
            "alpha": alpha, "epsilon": eps}


def _run_mb_demo(cfg: dict, out: Path) -> dict:
    _require(cfg, "beta_inv_energy", "alpha_dimensionless", "t_max_time")
    beta = float(cfg["beta_inv_energy"])
    ham, jumps = _model(cfg)
    bath = _bath(cfg, beta)
    demo = ex.mb_thermalization_demo(
        ham, jumps, bath, float(cfg["alpha_dimensionless"]),
        float(cfg["t_max_time"]), n_times=int(cfg.get("n_times", 60)))
    rp.write_csv(out / "trajectory.csv",
                 ["t", "distance", "kms_distance", "mixing_bound",
                  "certificate"], demo.rows())
    bound_ok = bool(np.all(demo.dists <= demo.mixing_bound + 1e-9))
    summary = {"gap": demo.gap, "alpha": demo.alpha,
               "final_distance": float(demo.dists[-1]),
               "mixing_bound_final": float(demo.mixing_bound[-1]),
               "certificate_terms": list(demo.certificate_terms),
               "bound_ok": bound_ok}
    if not bound_ok:
        worst = float(np.max(demo.dists - demo.mixing_bound))
        raise ExperimentFailed("trajectory exceeded the mixing bound",
                               {"worst_excess": worst})
    return summary


def _run_davies_compare(cfg: dict, out: Path) -> dict:
    _require(cfg, "beta_inv_energy", "alpha_grid_dimensionless")
    beta = float(cfg["beta_inv_energy"])
    seed = _seed(cfg)
    ham, jumps = _model(cfg)
    bath = _bath(cfg, beta)
    rep = ex.davies_compare(ham, jumps, bath,
                            _grid(cfg, "alpha_grid_dimensionless"),
                            seed=seed)
    rp.write_csv(out / "compare.csv", ["alpha", "coeff_dist", "traj_dist"],
                 rep.rows())
    summary = {"traj_slope": rep.traj_slope, "gap_davies": rep.gap_davies,
               "coeff_monotone": rep.coeff_monotone,
               "traj_monotone": rep.traj_monotone,
               "suppression_ok": rep.suppression_ok,
               "offdiag_ratio_dev": rep.offdiag_ratio_dev,
               "n_probes": rep.n_probes}
    failures = {}
    if not (rep.coeff_monotone and rep.traj_monotone):
        failures["monotone"] = [rep.coeff_monotone, rep.traj_monotone]
    if not rep.suppression_ok:
        failures["suppression_ok"] = False
    if rep.offdiag_ratio_dev >= 1e-6:
        failures["offdiag_ratio_dev"] = rep.offdiag_ratio_dev
    if failures:
        raise ExperimentFailed("weak-coupling collapse invariants failed",
                               failures)
    return summary


def _run_mlsi(cfg: dict, out: Path) -> dict:
    _require(cfg, "beta_inv_energy", "kappa_dimensionless")
    seed = _seed(cfg)
    rep = ex.stabilizer_mlsi_report(
        j_z=float(cfg.get("model_j_z", 1.0)),
        j_x=float(cfg.get("model_j_x", 0.5)),
        kappa=float(cfg["kappa_dimensionless"]),
        beta=float(cfg["beta_inv_energy"]),
        n_probes=int(cfg.get("n_probes", 200)), seed=seed)
    rp.write_csv(out / "mlsi.csv",
                 ["gap", "mlsi", "gap_ratio", "decay_ok"],
                 [[rep.gap, rep.mlsi, rep.gap_ratio, rep.decay_ok]])
    summary = {"gap": rep.gap, "mlsi": rep.mlsi, "gap_ratio": rep.gap_ratio,
               "decay_ok": rep.decay_ok, "n_qubits": rep.n_qubits}
    if not rep.decay_ok:
        raise ExperimentFailed(
            "entropy decay at half the sampled rate failed",
            {"mlsi": rep.mlsi, "gap": rep.gap})
    return summary


# ---------- validation suite ----------

def validation_rows() -> list:
    """The invariant battery behind ``validate``: one row per check."""
    rows = []

    def add(name, value, threshold):
        rows.append({"check": name, "value": float(value),
                     "threshold": float(threshold),
                     "passed": bool(value <= threshold)})

    for delta, delta_prime in ((0.5, 1.0), (0.3, 0.9)):
        conv = an.convolution_identity_check(delta, delta_prime)
        tag = f"delta={delta} delta'={delta_prime}"
        add(f"convolution residual {tag}", conv.residual, 1e-10)
        add(f"convolution |g_l1 - 1| {tag}", abs(conv.g_l1 - 1.0), 1e-10)

    add("pinned coefficient Lambda(kappa=1 beta=1 nu=0) deviation",
        abs(gn.lambda_gaussian(1.0, 1.0, 0.0, 0.0) - 3.4601207113323196),
        1e-11)

    models = [(md.single_qubit(1.0), "1-qubit"),
              (md.random_kl_local(2, 2, 3, 1.0, seed=7), "2-qubit")]
    beta = 1.0
    for ham, tag in models:
        jumps = md.pauli_jump_set(ham.n_qubits)
        bath = gn.bath_make(beta, 0.2, 1.0, 2.0 * ham.norm() + 0.5)
        gens = [("gaussian", gn.build_gaussian_generator(ham, jumps, 1.5,
                                                         beta)),
                ("macroscopic_bath", gn.build_mb_generator(ham, jumps, bath,
                                                           0.7)),
                ("davies", gn.build_davies(ham, jumps, beta))]
        for family, gen in gens:
            rho = gen.gibbs.rho
            add(f"KMS residual {family} {tag}",
                an.kms_symmetry_residual(gen, rho), KMS_RESIDUAL_TOL)
            add(f"fixed point {family} {tag}",
                an.fixed_point_residual(gen, rho), FIXED_POINT_TOL)

    ham1 = md.single_qubit(1.0)
    jumps1 = md.pauli_jump_set(1)
    gen0 = gn.build_gaussian_generator(ham1, jumps1, 1.5, 0.0)
    gap0 = an.spectral_gap(gen0).gap
    pred = 4.0 * gn.lambda_gaussian(1.5, 0.0, 0.0, 0.0)
    add("infinite-temperature gap identity", abs(gap0 - pred) / pred, 1e-10)

    ham2 = md.random_kl_local(2, 2, 3, 1.0, seed=7)
    gen2 = gn.build_gaussian_generator(ham2, md.pauli_jump_set(2), 1.5, 1.0)
    rng = np.random.default_rng(17)
    worst_ep = 0.0
    for _ in range(20):
        _, ep = an.entropy_functionals(gen2, an.hs_random_state(4, rng))
        worst_ep = min(worst_ep, ep)
    add("entropy production >= 0 (20 probes)", -worst_ep, 1e-10)

    t_grid = np.linspace(0.0, 5.0 / an.spectral_gap(gen2).gap, 20)
    mix_ok = True
    for _ in range(3):
        mix_ok &= an.mixing_bound_check(gen2, an.hs_random_state(4, rng),
                                        t_grid).ok
    add("mixing bound (3 probes x 20 times)", 0.0 if mix_ok else 1.0, 0.5)
    return rows


def _run_validate(cfg: dict, out: Path) -> dict:
    rows = validation_rows()
    rp.write_csv(out / "validation.csv",
                 ["check", "value", "threshold", "passed"], rows)
    all_ok = all(r["passed"] for r in rows)
    summary = {"n_checks": len(rows), "all_passed": all_ok,
               "failed": [r["check"] for r in rows if not r["passed"]]}
    if not all_ok:
        raise ExperimentFailed("validation suite failed",
                               {"failed": summary["failed"]})
    return summary


_RUNNERS = {
    "gap-sweep": _run_gap_sweep,
    "monotonicity": _run_monotonicity,
    "ri-scaling": _run_ri_scaling,
    "ri-fixed-point": _run_ri_fixed_point,
    "mb-demo": _run_mb_demo,
    "davies-compare": _run_davies_compare,
    "mlsi": _run_mlsi,
    "validate": _run_validate,
}


def execute_config(cfg: dict, base_dir: Path) -> Path:
    """Run one parsed config; returns the output directory.

    The experiment's own invariant failures are recorded in
    ``violation.json`` inside the output directory before the exception
    propagates to the exit-code mapping.
    """
    out = Path(cfg["out_dir"])
    if not out.is_absolute():
        out = base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = _RUNNERS[cfg["kind"]](cfg, out)
    except (InvariantViolation, ConvergenceError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc),
                  "kind": cfg["kind"]}
        if isinstance(exc, ExperimentFailed):
            record["details"] = exc.details
        rp.write_json(out / "violation.json", record)
        raise
    rp.write_json(out / "summary.json", {"kind": cfg["kind"], **summary})
    rp.write_json(out / "config_echo.json",
                  {"config": cfg, "package": "kmslab 0.1.0"})
    return out


# ---------- consolidated report ----------

def _slope_ci(rows, xkey: str, ykey: str):
    xs = np.array([r[xkey] for r in rows], dtype=float)
    ys = np.array([r[ykey] for r in rows], dtype=float)
    if len(xs) < 3 or np.any(ys <= 0):
        return None
    coeffs, cov = np.polyfit(np.log(xs), np.log(ys), 1, cov=True)
    half = 1.96 * float(np.sqrt(cov[0, 0]))
    return float(coeffs[0]), half


_SLOPE_SOURCES = {"ri-scaling": ("scaling.csv", "alpha", "distance"),
                  "davies-compare": ("compare.csv", "alpha", "traj_dist")}


def build_report(results_dir: Path) -> list:
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise EmptyResults(f"{results_dir} is not a directory")
    run_dirs = sorted(p.parent for p in results_dir.rglob("summary.json"))
    if not run_dirs:
        raise EmptyResults(f"no run outputs under {results_dir}")

    entries = []
    for run_dir in run_dirs:
        summary = json.loads((run_dir / "summary.json").read_text())
        kind = summary.get("kind", "unknown")
        entry = {"run": str(run_dir.relative_to(results_dir)), "kind": kind}
        entry.update({k: v for k, v in summary.items()
                      if isinstance(v, (int, float, bool, str))})
        if kind in _SLOPE_SOURCES:
            csv_name, xkey, ykey = _SLOPE_SOURCES[kind]
            csv_path = run_dir / csv_name
            if csv_path.exists():
                fit = _slope_ci(rp.read_csv(csv_path), xkey, ykey)
                if fit is not None:
                    entry["fit_slope"], entry["fit_ci95"] = fit
        if kind == "ri-scaling" and "fit_slope" in entry:
            entry["slope_in_quartic_band"] = bool(
                3.5 <= entry["fit_slope"] <= 4.5)
        entry["figure"] = rp.render_figure(kind, run_dir)
        entries.append(entry)

    report_dir = results_dir / "report"
    report_dir.mkdir(exist_ok=True)
    rp.write_json(report_dir / "index.json", {"runs": entries})

    sections = ["# Experiment summary", ""]
    for kind in sorted({e["kind"] for e in entries}):
        grouped = [e for e in entries if e["kind"] == kind]
        keys = ["run"] + sorted({k for e in grouped for k in e}
                                - {"run", "kind"})
        rows = [[e.get(k, "") for k in keys] for e in grouped]
        sections += [f"## {kind}", "", rp.markdown_table(keys, rows), ""]
    (report_dir / "summary.md").write_text("\n".join(sections))
    return entries


# ---------- entry points ----------

def _dispatch(action, ok_message) -> int:
    try:
        result = action()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return 3
    except ConvergenceError as exc:
        click.echo(f"not converged: {exc}", err=True)
        return 4
    click.echo(ok_message(result))
    return 0


@click.group()
def main():
    """Numerics laboratory for KMS-symmetric thermalization generators."""


@main.command()
@click.argument("config_path", type=click.Path(path_type=Path))
def run(config_path):
    """Execute the experiment described by CONFIG_PATH (flat JSON)."""
    def action():
        cfg = load_config(config_path)
        return execute_config(cfg, config_path.parent)
    sys.exit(_dispatch(action, lambda out: f"ok: wrote {out}"))


@main.command()
@click.argument("results_dir", type=click.Path(path_type=Path))
def report(results_dir):
    """Consolidate run outputs under RESULTS_DIR into a summary."""
    def action():
        return build_report(Path(results_dir))
    sys.exit(_dispatch(
        action, lambda entries: f"ok: report covers {len(entries)} runs"))


@main.command()
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Also write validation.csv and summary.json here.")
def validate(out_dir):
    """Run the invariant suite; exit 0 only if every check passes."""
    def action():
        rows = validation_rows()
        for row in rows:
            status = "PASS" if row["passed"] else "FAIL"
            click.echo(f"{status} {row['check']}: {rp.fmt(row['value'])}"
                       f" (threshold {rp.fmt(row['threshold'])})")
        if out_dir is not None:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            rp.write_csv(path / "validation.csv",
                         ["check", "value", "threshold", "passed"], rows)
            all_ok = all(r["passed"] for r in rows)
            rp.write_json(path / "summary.json",
                          {"kind": "validate", "n_checks": len(rows),
                           "all_passed": all_ok,
                           "failed": [r["check"] for r in rows
                                      if not r["passed"]]})
        failed = [r["check"] for r in rows if not r["passed"]]
        if failed:
            raise ExperimentFailed("validation suite failed",
                                   {"failed": failed})
        return rows
    sys.exit(_dispatch(action, lambda rows: f"ok: {len(rows)} checks passed"))


if __name__ == "__main__":
    main()
