"""Deterministic annealing simulator for random ferromagnetic Ising chains.

Compares heat-bath simulated annealing, real-time quantum annealing, and
imaginary-time quantum annealing on an equal footing through the free-fermion
(pairing-matrix) representation of the chain dynamics.
"""

from .errors import (
    ConfigError,
    IntegrationError,
    NonRepresentableError,
    NumericError,
)
from .model import (
    FIXED,
    OPEN,
    PERIODIC,
    QA_FIELD,
    SA_TEMPERATURE,
    UNIFORM01,
    AnnealSchedule,
    CouplingSet,
    DisorderSpec,
    sample_couplings,
    schedule_value,
)
from .fermion_hamiltonian import (
    BdGSpectrum,
    HeatBathCouplings,
    QuadraticHamiltonian,
    bdg_diagonalize,
    build_qa_hamiltonian,
    build_sa_hamiltonian,
    ground_state_pairing,
    heat_bath_couplings,
    ordered_qa_dispersion,
)
from .observables import (
    GreensPair,
    ObservableRecord,
    defect_and_energy,
    greens_from_pairing,
)
from .dynamics import (
    IMAGINARY_TIME,
    REAL_TIME,
    Trajectory,
    evolve_pairing,
    kspace_evolve,
    landau_zener_demo,
)
from .ensemble import (
    EnsembleRecord,
    EnsembleStats,
    FitResult,
    aggregate,
    fit_scaling,
    run_ensemble,
)

__version__ = "0.1.0"
