"""Entropy lower bounds for LDPC/LDGM ensembles on BIOS channels.

The library evaluates the trial-entropy functional at density-evolution
fixed points to lower-bound the per-bit conditional entropy under bit-MAP
decoding, and verifies the bound against exact small-instance oracles
(GF(2) rank on the erasure channel, codebook enumeration in general).
"""

__version__ = "0.1.0"

from .channels import (BEC, BIAWGN, BSC, DiscreteTable, LlrPopulation,
                       binary_entropy, binary_entropy_inverse, capacity,
                       llr_of_output, parse_channel, sample_llr_population,
                       symmetry_test)
from .degrees import (DegreePair, PoissonLaw, PolyLaw, edge_perspective,
                      parse_degree_pair, regular_pair)
from .density import (BecState, DEState, bec_bp_threshold, bec_de_step,
                      bec_fixed_point, bec_trajectory, check_update,
                      de_iterate, variable_update)
from .ensembles import (DegreeProfile, EnsembleLaws, EnsembleSpec, TannerGraph,
                        asymptotic_laws, design_rate, empirical_degree_profile,
                        multi_poisson_profile, multi_poisson_spec,
                        poisson_spec, sample_graph, sample_multi_poisson,
                        sample_poisson, sample_standard, standard_spec,
                        tv_distance)
from .errors import (BudgetExceeded, ImpossibleOutput, InconsistentInfinity,
                     IntegralityError, MapentError, NoBadBranch,
                     NonSymmetricInput, SocketExhaustion, SpecParseError)
from .decoding import (BoundComparison, MessageSet, Observation, OracleReport,
                       bethe_free_energy, bp_decode, concentration_probe,
                       exact_bitmap_error, exact_entropy_bec,
                       exact_entropy_enum, messages_iid, parity_matrix,
                       sample_observation, verify_bound)
from .gf2 import Gf2Matrix
from .trial_entropy import (McBoundConfig, ThresholdResult, TrialEntropyReport,
                            bec_bound, bec_map_threshold,
                            bec_stationary_points, bec_trial_entropy,
                            conjectured_pb, fano_bounds, map_bound_general,
                            phi_bound_mc, phi_v_mc, simple_ansatz_bound)
