"""Evolutionary search over activation-function expression trees."""

from .config import DataSpec, NetworkSpec, SearchConfig, load_config, parse_config_text
from .errors import ConfigError
from .expr import (BINARY_OPS, UNARY_OPS, X, Binary, Leaf, ParseError, StructureError, Unary,
                   canonical_id, core_unit, count_space, crossover, enumerate_s1, mutate, parse,
                   sample_random)
from .nn import NetworkConfig, TrainConfig, TrainingMetrics, init_network, train
from .numerics import DEFAULT_POLICY, SafetyPolicy, deriv, eval_tree, grad_check
from .persist import ResumeMismatch, load_result, run_to_dir
from .search import (Candidate, SearchResult, fitness, run_evolution, run_exhaustive,
                     run_random_search, run_search, top_k)

__all__ = [
    "BINARY_OPS", "UNARY_OPS", "X", "Binary", "Leaf", "Unary", "ParseError", "StructureError",
    "canonical_id", "core_unit", "count_space", "crossover", "enumerate_s1", "mutate", "parse",
    "sample_random", "DEFAULT_POLICY", "SafetyPolicy", "deriv", "eval_tree", "grad_check",
    "NetworkConfig", "TrainConfig", "TrainingMetrics", "init_network", "train",
    "ConfigError", "DataSpec", "NetworkSpec", "SearchConfig", "load_config", "parse_config_text",
    "Candidate", "SearchResult", "fitness", "run_evolution", "run_exhaustive",
    "run_random_search", "run_search", "top_k", "ResumeMismatch", "load_result", "run_to_dir",
]
