"""Verification of decisive stochastic systems.

Qualitative and approximate quantitative analysis of reachability,
repeated reachability and Muller conditions on countable Markov chains,
abstractions between them, and stochastic timed automata via thick graphs.
"""

from .abstraction import (
    AbstractionHandle,
    AlphaMap,
    Soundness,
    certify_complete,
    certify_sound_via_decisiveness,
    check_abstraction,
    pushforward,
    soundness_witness_search,
)
from .core import FiniteChain, LazyChain, MarkovChain, SparseDistribution, StateSet
from .errors import DecisiveError, InvalidModel, ParseError, Refusal
from .estimators import ExactEstimator, MonteCarloEstimator, TimeInterval
from .evidence import Evidence, EvidenceKind
from .omega import MullerAutomaton, product
from .qualitative import Qual, almost_sure_omega, attractor_graph, avoid_set, bsccs
from .quantitative import (
    ApproxResult,
    Status,
    approx_reach,
    approx_repeated,
    approx_until,
    quant_omega_abstraction,
    quant_omega_attractor,
    time_bounded_reach,
)

__version__ = "0.1.0"

__all__ = [
    "AbstractionHandle", "AlphaMap", "ApproxResult", "DecisiveError", "Evidence", "EvidenceKind",
    "ExactEstimator", "FiniteChain", "InvalidModel", "LazyChain", "MarkovChain",
    "MonteCarloEstimator", "MullerAutomaton", "ParseError", "Qual", "Refusal", "Soundness",
    "SparseDistribution", "StateSet", "Status", "TimeInterval", "almost_sure_omega",
    "approx_reach", "approx_repeated", "approx_until", "attractor_graph", "avoid_set", "bsccs",
    "certify_complete", "certify_sound_via_decisiveness", "check_abstraction", "product",
    "pushforward", "quant_omega_abstraction", "quant_omega_attractor",
    "soundness_witness_search", "time_bounded_reach",
]
