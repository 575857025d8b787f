"""User profiling from web-transaction logs with one-class classifiers."""

from .features import (FeatureVector, KeyMode, Vocabulary, Window,
                       WindowConfig, aggregate, build_vocabulary,
                       encode_transaction, map_reputation, split_media_type,
                       window_stream)
from .kernels import KernelKind, KernelSpec, eval_kernel, gram_matrix
from .logdata import (SynthConfig, Transaction, TransactionLog, UserProfile,
                      filter_users, generate_synthetic, make_profiles,
                      parse_log, serialize_log, split_oldest)
from .ocsvm import Decision, OcSvmModel, decide_ocsvm, train_ocsvm
from .smo import InfeasibleError, SolverError
from .svdd import SvddModel, decide_svdd, train_svdd

__version__ = "0.1.0"

__all__ = [
    "FeatureVector", "KeyMode", "Vocabulary", "Window", "WindowConfig",
    "aggregate", "build_vocabulary", "encode_transaction", "map_reputation",
    "split_media_type", "window_stream",
    "KernelKind", "KernelSpec", "eval_kernel", "gram_matrix",
    "SynthConfig", "Transaction", "TransactionLog", "UserProfile",
    "filter_users", "generate_synthetic", "make_profiles", "parse_log",
    "serialize_log", "split_oldest",
    "Decision", "OcSvmModel", "decide_ocsvm", "train_ocsvm",
    "InfeasibleError", "SolverError",
    "SvddModel", "decide_svdd", "train_svdd",
    "__version__",
]
