"""berryion: geometric-phase simulator for a laser-driven trapped-ion vibrational mode."""

from .hilbert import (
    QSpace,
    Ket,
    LinOp,
    NumericsError,
    annihilator,
    creator,
    number_op,
    identity_op,
    internal_op,
    expm_apply,
    overlap,
    expectation,
    fidelity_up_to_phase,
)
from .bosonic import (
    SqueezeParam,
    TruncationError,
    number_state,
    coherent_state,
    squeeze_op,
    displacement_op,
    squeezed_number_state,
    squeeze_interior_cap,
)
from .model import (
    Couplings,
    TrapParams,
    PhasedDrive,
    build_H,
    build_H_JC,
    eigensystem_analytic,
    dark_state,
    build_lab_H,
    derive_couplings,
    QUARTER_HANNAY_R,
)
from .evolve import Schedule, Trajectory, propagate, apply_flip_pulse, adiabaticity_report
from .phases import (
    PhaseReport,
    LoopSpec,
    berry_phase_analytic,
    berry_phase_fock,
    dynamical_phase_analytic,
    wilson_loop_phase,
    eigenstate_loop,
    squeezed_fock_loop,
    extract_phases,
    lab_frame_phase,
)
from .protocol import (
    ProtocolReport,
    FeasibilityReport,
    run_phase_reversal,
    run_fock_superposition,
    run_state_reversal,
    run_cat,
    run_readout,
    analytic_readout,
    feasibility_check,
    measure_berry_adiabatic,
    run_lab_cross_validation,
    BE9_PARAMS,
    CA40_PARAMS,
)

__version__ = "0.1.0"
