"""Dynamic Bayesian persuasion with a Markovian state.

Concavification on simplex grids, absorbing-set certificates, discounted and
finite-horizon values, and Monte Carlo simulation of sender strategies.
"""
from .absorbing import (AbsorbingCertificate, RegionD, build_region_D, is_absorbing,
                        maximal_absorbing_subset, orbit_absorbing)
from .concav import (Envelope, UtilityFunction, cav, contact_set, example1_utility,
                     optimal_static_split, supporting_hyperplanes)
from .config import DEFAULT, Tolerances
from .grid import SimplexGrid
from .markov import (TransitionMatrix, advance_belief, homothety_test, mixing_time,
                     operator_norms, stationary_distribution)
from .simplex import Split, caratheodory_reduce, convex_membership
from .strategy import (ConfinedStrategy, BlockStrategy, confined_chain_construction,
                       ergodic_check, signal_rule_from_split, simulate)
from .value import (closed_form_value, effective_belief, estimate_v_infinity,
                    finite_horizon_value, sandwich_bounds, value_iteration)

__version__ = "0.1.0"
