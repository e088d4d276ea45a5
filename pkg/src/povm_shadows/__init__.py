"""Classical shadows with informationally complete product POVMs.

Workflow: build a POVM (`builtin_povm`), a state (`ghz`, `ground_state`,
...), sample an outcome ensemble (`sample_mps` / `sample_dense`), then
estimate Pauli observables through the inverted measurement channel
(`measurement_channel`, `factor_table`, `estimate`) or reconstruct
fidelities (`hypothesis_state`, `shadow_overlaps`).
"""

from .channel import (
    BlochSuperoperator,
    ChannelInversionError,
    FactorTable,
    InformationallyIncompleteError,
    MeasurementChannel,
    NoiseModel,
    adjoint_on_pauli,
    factor_table,
    measurement_channel,
    parse_noise,
)
from .estimator import (
    Estimate,
    Mean,
    MedianOfMeans,
    PauliObservable,
    SampleBudget,
    bound_constant,
    chebyshev_samples,
    enumerated_expectation,
    estimate,
    max_error,
    parse_observable,
    per_record_values,
    required_samples,
    variance_bound,
    zz_correlation_matrix,
    zz_pair,
)
from .fidelity import (
    HypothesisState,
    fidelity_pure,
    hypothesis_state,
    load_matrix,
    project_to_physical,
    save_matrix,
    shadow_overlaps,
    simplex_project,
)
from .povm import (
    BUILTIN_NAMES,
    LIMIT_RULE,
    Povm,
    SnapshotRule,
    ValidationReport,
    builtin_povm,
    noise_adjoint_povm,
    snapshot_distribution,
    validate_povm,
)
from .sampler import (
    ShadowEnsemble,
    outcome_probabilities,
    record_uniforms,
    sample_dense,
    sample_mps,
    sample_noisy,
    sample_noisy_state,
)
from .states import (
    DenseState,
    GroundState,
    MpsState,
    SpinHamiltonian,
    all_spins_down,
    disordered_heisenberg,
    exact_expectation,
    ghz,
    ground_state,
    load_mps,
    local_depolarizing_scale,
    product_operator_expectation,
    product_state,
    save_mps,
    tfim_hamiltonian,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
