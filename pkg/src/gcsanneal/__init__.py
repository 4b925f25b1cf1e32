"""Variational quantum-annealing emulation for Ising/QUBO problems with closed-form coherent states."""

__version__ = "0.1.0"

from .qubo import (  # noqa: E402
    BinaryQubo,
    QuboInstance,
    SpinConfiguration,
    ValidationError,
    energy,
    fold_bias,
    from_binary,
    gen_ea3d,
    gen_ea_lattice,
    read_instance,
    unfold_spins,
    write_instance,
)
from .gcs import GcsParams, NumericalError, expval_sx, expval_z, expval_zz, gradient, loss  # noqa: E402
from .statevector import ResourceError, brute_force_min, build_state, expval  # noqa: E402
from .anneal import AnnealConfig, AnnealResult, run  # noqa: E402
from .baselines import SaConfig, simulated_annealing  # noqa: E402
