from .lrp import RULE_EPSILON, RULE_ZPLUS, lrp_relevance_batch
from .methods import METHOD_IDS, MethodConfig, explain, explain_batch
from .preprocess import (Attribution, PreprocessPolicy, normalise_array,
                         normalise_second_moment, preprocess, resolve_mode)

__all__ = [
    "RULE_EPSILON", "RULE_ZPLUS", "lrp_relevance_batch",
    "METHOD_IDS", "MethodConfig", "explain", "explain_batch",
    "Attribution", "PreprocessPolicy", "normalise_array",
    "normalise_second_moment", "preprocess", "resolve_mode",
]
