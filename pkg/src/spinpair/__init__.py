"""Non-Markovian dynamics of two exchange-coupled qubits in independent zero-temperature baths."""
from .baths import (CorrelationProfile, Lorentzian, MarkovianFlat, OhmicLorentzDrude, Tabulated,
                    correlation_B, correlation_B_numeric, correlation_Phi, decoherence_G,
                    load_spectrum, make_profile)
from .core import (PhysicalityReport, SystemParams, UnphysicalStateError, bell_psi_minus,
                   check_physical, density_from_pure)
from .entanglement import concurrence, concurrence_bell, population, purity, x_state_concurrence
from .propagator import AuxIntegrals, Propagator, aux_integrals, evolve, evolve_bell, u2_1, u2_2, u4

__version__ = "0.1.0"
