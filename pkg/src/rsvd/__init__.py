"""Hamiltonian reduction of SL(2n, C) to a dual pair of RSvD-type integrable systems.

Submodules:

``matgroup``   factorizations, observables, Poisson bracket, free flows
``reduction``  constraints, spectral frame, moduli, reconstruction and extraction
``models``     closed-form reduced Hamiltonians and the rational limit
``dynamics``   canonical integration and the two-route flow experiments
``cli``        the ``rsvd`` command-line driver
"""

from .dynamics import (
    darboux_experiment,
    duality_experiment,
    integrate_canonical,
)
from .errors import *  # noqa: F401,F403
from .matgroup import (
    MasterPoint,
    ObservableTriple,
    decompose_bk,
    decompose_kb,
    free_hamiltonian,
    observables,
)
from .models import DualPoint, actions_F_red, ham_f1_dual, ham_phi1_red, ham_rational
from .reduction import (
    CouplingParams,
    ReducedPoint,
    build_params,
    domain_check,
    extract_invariants,
    reconstruct_point,
)
from .trajectory import Trajectory

__version__ = "0.1.0"
