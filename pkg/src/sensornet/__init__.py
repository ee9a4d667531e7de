"""Dependence analysis, subset selection and online fusion for sensor streams."""

from .data import AlphabetSpec, SensorMatrix, mask_of, members, project_subset, quantize_readings
from .empirical import EntropyVector, empirical_entropy_vector, entropy_bits, joint_type, marginalize
from .errors import SensorNetError
from .fusion import LossFunction, build_family, default_eta, online_fusion, regret_bound
from .lz78 import lz78_parse, lz_entropy_estimate, lz_entropy_vector, markov_deviation_bound
from .polymatroid import check_polymatroid, is_independent, round_to_matroid
from .selection import EntropyOracle, early_stop_gap, greedy_selection, random_selection, random_selection_guarantee
from .sources import SourceSpec, analytic_entropy_vector, generate, markov_entropy_rate

__all__ = [
    "AlphabetSpec",
    "EntropyOracle",
    "EntropyVector",
    "LossFunction",
    "SensorMatrix",
    "SensorNetError",
    "SourceSpec",
    "analytic_entropy_vector",
    "build_family",
    "check_polymatroid",
    "default_eta",
    "early_stop_gap",
    "empirical_entropy_vector",
    "entropy_bits",
    "generate",
    "greedy_selection",
    "is_independent",
    "joint_type",
    "lz78_parse",
    "lz_entropy_estimate",
    "lz_entropy_vector",
    "marginalize",
    "markov_deviation_bound",
    "markov_entropy_rate",
    "mask_of",
    "members",
    "online_fusion",
    "project_subset",
    "quantize_readings",
    "random_selection",
    "random_selection_guarantee",
    "regret_bound",
    "round_to_matroid",
]
