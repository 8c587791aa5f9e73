"""Exact Fock-space simulation of measurement-induced linear-optical quantum gates."""

__version__ = "0.1.0"

from .fock import (  # noqa: E402
    FockError,
    FockSpace,
    PureState,
    fidelity,
    inner_product,
    make_basis_state,
    normalize,
    tensor,
)
from .interferometer import (  # noqa: E402
    BeamSplitter,
    OpticalCircuit,
    PhaseShift,
    apply_element,
    apply_mode_unitary,
    beamsplitter_unitary,
    circuit_mode_matrix,
    permanent,
)
from .measurement import (  # noqa: E402
    DetectionPattern,
    DetectorModel,
    HeraldImpossibleError,
    MeasurementResult,
    detect_with_model,
    outcome_distribution,
    postselect,
    qnd_photon_presence,
    sample_outcome,
)
from .gates import (  # noqa: E402
    NS_PARAMETERS,
    DualRailQubit,
    HeraldedGateResult,
    NsParameters,
    PolarizationQubit,
    bell_pair,
    cnot_polarization,
    csign,
    logical_readout,
    ns_gate,
    single_qubit_gate,
    solve_ns_parameters,
)
from .teleport import (  # noqa: E402
    EncodedBlock,
    LossChannel,
    ResourceState,
    apply_loss,
    detect_and_recover,
    encode_block,
    make_resource,
    memory_cycle,
    teleport_qubit,
    teleported_csign,
)
