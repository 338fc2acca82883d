"""Qudit measurement simulator: spin, ancilla-qubit pointer, counter circuits."""
from .register import (DensityMatrix, OperatorSpec, PureState, Register, Role, apply_operator,
                       basis_state, expectation, make_register, partial_trace, tensor)
from .operators import (controlled_power, conjugated_observable, fourier, number_operator,
                        pauli_x, pauli_z, qubit_pauli, random_unitary, x_eigenstate)
from .premeasurement import (CoherenceGram, bell_state, entangle, pointer_embedding,
                             pointer_observable, prepare_initial, recombine, which_path_model)
from .circuits import (basis_choice, measure_destructive, measure_N_local,
                       measure_spin_X_then_project, nondestructive_N, nondestructive_XX,
                       nondestructive_ZZ, sequential_suite, verify_appendix)

__version__ = "0.1.0"
