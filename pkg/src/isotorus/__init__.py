"""Isospectral tori of quasi-periodic Schrodinger operators via periodic approximants."""
__version__ = "0.1.0"

from .errors import (AmbiguityError, BracketError, ConfigError, InvalidFrameError,
                     InvalidPotentialError, NotFoundError, NumericalError, OutOfBandError,
                     PrecisionError, ResolutionError, StiffnessError)
from .frequency import (Frequency, OmegaLattice, RationalFrequency, build_lattice,
                        quotient_norm, rational_approximation)
from .potential import (FourierPotential, LatticePotential, lame_potential,
                        pushforward_periodic, random_potential)
from .hill import SpectrumData, spectrum
from .dual import crosscheck_hill, dual_matrix, floquet_branch, gap_edges_dual
from .flow import (GapFrame, TorusState, dirichlet_to_torus, integrate_flow,
                   isospectral_map, torus_distance)
from .convergence import (flow_convergence_study, gap_fourier_check, gap_matching,
                          hausdorff_distance, spectral_scaling_scan)
