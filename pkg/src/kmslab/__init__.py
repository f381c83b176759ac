"""Numerics laboratory for KMS-symmetric thermalization generators.

Three generator families built over the same Bohr-frequency machinery
(``generators``), exact repeated-interaction channel simulation at small
qubit counts (``ri_sim``), spectral/entropy/mixing diagnostics
(``analysis``), packaged experiment drivers (``experiments``), and a
deterministic batch CLI (``cli``).

Importing ``kmslab`` itself stays lightweight: submodules (and the names
re-exported below) load on first attribute access, so the CLI can pin the
numerical thread-pool environment before numpy comes in.
"""

__version__ = "0.1.0"

_EXPORTS = {
    # models
    "Hamiltonian": "models", "JumpSet": "models", "GibbsState": "models",
    "single_qubit": "models", "commuting_zz_chain": "models",
    "stabilizer_pair": "models", "nn_chain_1d": "models",
    "random_kl_local": "models", "custom": "models",
    "build_hamiltonian": "models", "pauli_jump_set": "models",
    "gibbs_state": "models",
    # generators
    "Generator": "generators", "BathSpec": "generators",
    "bath_make": "generators", "build_gaussian_generator": "generators",
    "build_gaussian_generator_quadrature": "generators",
    "build_mb_generator": "generators", "build_davies": "generators",
    "ri_effective_generator": "generators", "lambda_gaussian": "generators",
    "gaussian_prefactor": "generators", "davies_gamma_default": "generators",
    "observation_time": "generators", "generator_dump": "generators",
    "generator_load": "generators",
    # analysis
    "spectral_gap": "analysis", "kms_symmetry_residual": "analysis",
    "fixed_point_residual": "analysis", "semigroup_evolver": "analysis",
    "mixing_curve": "analysis", "mixing_bound_check": "analysis",
    "entropy_functionals": "analysis", "entropy_decay_check": "analysis",
    "hs_random_state": "analysis", "mlsi_probes": "analysis",
    "mlsi_estimate": "analysis", "monotonicity_sweep": "analysis",
    "convolution_identity_check": "analysis", "f_delta": "analysis",
    "g_delta": "analysis", "endtoend_bound": "analysis",
    "endtoend_bound_terms": "analysis",
    # repeated-interaction simulation
    "RIConfig": "ri_sim", "ri_channel": "ri_sim",
    "dyson2_components": "ri_sim", "channel_vs_semigroup": "ri_sim",
    "fixed_point_and_therm_index": "ri_sim", "extract_coherent": "ri_sim",
    "weighted_commutator_norm": "ri_sim", "probe_states": "ri_sim",
    "richardson_check": "ri_sim",
    # experiment drivers
    "check_commuting": "experiments", "davies_from_bath": "experiments",
    "davies_compare": "experiments", "mb_thermalization_demo": "experiments",
    "stabilizer_mlsi_report": "experiments",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name):
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module 'kmslab' has no attribute {name!r}")
    import importlib

    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value    # cache so later lookups skip this hook
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
