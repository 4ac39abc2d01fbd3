"""Quantum and classical site percolation on honeycomb waveguide lattices."""

__version__ = "0.1.0"

from .errors import (DependencyError, DomainError, PropagationError, QpercError, ResourceError,
                     ValidationError)
from .lattice import Lattice, LatticeSpec, SiteIndex, generate_lattice, neighbors, site_coordinates
from .hamiltonian import CouplingModel, SparseHamiltonian, build_hamiltonian, coupling_strength
from .propagator import StateVector, EvolutionTrace, dense_oracle, evolve, evolve_trace, initial_state
from .observables import (ExponentFit, IprSample, bound_fraction, effective_width, fit_exponent, ipr,
                          ipr_statistics, percolation_event)
from .clusters import (ClusterLabeling, exact_spanning_probability, label_clusters, spanning_check,
                       spanning_onsets)
from .classical import (FlowFront, classical_effective_width, classical_ipr, classical_threshold_from_ipr,
                        classical_trace, flow_front)
from .ensemble import (ExperimentConfig, TransitionCurve, TrialResult, classical_spanning_curve,
                       estimate_percolation_probability, preset, run_classical_sweep, run_quantum_trial, scaling_study, sweep)
