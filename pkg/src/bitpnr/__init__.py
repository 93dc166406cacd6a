"""Error model, simulation and error mitigation for a bitwise
photon-number-resolving detector."""

from .exceptions import DomainError, ExpansionTooLarge, IllConditioned, IllConditionedBasis
from .fock import (
    Label,
    ProbVector,
    bit_decompose,
    coherent_distribution,
    fock_state,
    generalized_parity,
    recompose,
    tvd,
)
from .hmm import (
    ConfusionMatrix,
    DetectorParams,
    EmissionPOVM,
    apply_confusion,
    confusion_matrix,
    emission_povm,
    table1_params,
    transition_matrix,
)
from .simulator import ResetKind, ResetModel, ShotRecord, simulate_ensemble, simulate_shot
from .calibration import CalibrationSet, extract_rates, recover_emission, synthesize_calibration
from .mitigation import (
    condition_number,
    condition_sweep,
    extracted_bits,
    invert_confusion,
    mitigate,
    project_simplex,
)
from .multimode import (
    ExpansionSpec,
    SparseDist,
    entry_count,
    kron_element,
    mitigate_element,
    mitigate_truncated,
    truncated_column,
)

__version__ = "0.1.0"
