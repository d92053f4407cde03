"""Classification-based heads mapping attribute posteriors to classes."""
from ._kernels import BACKEND
from .features import decode_step, encode_batch, encode_features
from .forest import ForestModel, rf_fit, rf_predict
from .heads import CONTEXT_KINDS, HEAD_KINDS, ClassifierHead, fit_head, load_head, save_head
from .hmm import HmmModel, hmm_decode, hmm_fit, hmm_path_log_prob
from .qda import GaussianClassModel, GaussianObservations, qda_fit, qda_predict

__all__ = [
    "BACKEND",
    "CONTEXT_KINDS",
    "HEAD_KINDS",
    "ClassifierHead",
    "ForestModel",
    "GaussianClassModel",
    "GaussianObservations",
    "HmmModel",
    "decode_step",
    "encode_batch",
    "encode_features",
    "fit_head",
    "hmm_decode",
    "hmm_fit",
    "hmm_path_log_prob",
    "load_head",
    "qda_fit",
    "qda_predict",
    "rf_fit",
    "rf_predict",
    "save_head",
]
