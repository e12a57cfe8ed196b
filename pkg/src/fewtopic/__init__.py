"""Few-shot topic modeling with neural Dirichlet priors and unrolled MAP-EM."""

from .config import METHODS, EpisodeConfig, config_for_method
from .corpus import CorpusSet, CountMatrix, DataSplit, filter_corpus, load_corpus, write_corpus
from .errors import ConfigError, ContractError, DataError, DimensionError, FewTopicError, ParseError
from .lda import LDAConfig, lda_baseline
from .metatrainer import TrainLog, evaluate_target, train
from .priornet import PriorNet, generate_priors
from .topicmodel import TopicModel, log_likelihood, perplexity, run_em, top_terms

__version__ = "0.1.0"

__all__ = [
    "METHODS", "EpisodeConfig", "config_for_method", "CorpusSet", "CountMatrix", "DataSplit",
    "filter_corpus", "load_corpus", "write_corpus", "ConfigError", "ContractError", "DataError",
    "DimensionError", "FewTopicError", "ParseError", "LDAConfig", "lda_baseline", "TrainLog",
    "evaluate_target", "train", "PriorNet", "generate_priors", "TopicModel", "log_likelihood",
    "perplexity", "run_em", "top_terms",
]
