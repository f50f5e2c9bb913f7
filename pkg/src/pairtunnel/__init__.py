"""Tunneling of an interaction-bound boson pair through a lattice barrier."""

__version__ = "0.1.0"

from .model import (
    EffectiveHoppings,
    LatticeOperator,
    ModelParams,
    PotentialProfile,
    build_full_hamiltonian,
    build_model,
    build_one_state_hamiltonian,
    build_three_state_hamiltonian,
    build_two_state_hamiltonian,
    eval_potential,
)
from .spectral import (
    BlochSolution,
    WannierState,
    band_structure_full,
    bloch_eigenproblem,
    dispersion_exact,
    dispersion_two_state,
    group_velocity,
    hopping_integrals,
    wannier_states,
)
from .scattering import ScatterSolution, solve_scattering, sweep_tunneling
from .dynamics import (
    OutcomeProbs,
    WavePacketSpec,
    classify_outcomes,
    make_packet,
    occupation_families,
    propagate,
    run_scattering_experiment,
)
