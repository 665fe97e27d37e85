from .brute import MAX_DEMANDS, MAX_SITES, TooLargeError, brute_force
from .exact import root_bound, solve_exact
from .heuristic import construct, greedy_sequences, improve, solve_heuristic
from .relocation import CardinalityError, attach_relocations, euclidean_road_cost, relocation_matching

__all__ = [
    "MAX_DEMANDS",
    "MAX_SITES",
    "TooLargeError",
    "brute_force",
    "solve_exact",
    "root_bound",
    "construct",
    "greedy_sequences",
    "improve",
    "solve_heuristic",
    "CardinalityError",
    "attach_relocations",
    "euclidean_road_cost",
    "relocation_matching",
]
