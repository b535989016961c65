"""martFL: quality-aware aggregation, verifiable quantized aggregation and a trading ledger."""
from .aggregation import (AggregationDecision, ClusteringTrace, DistributionKind, NoPurchasableModels,
                          adjust_baseline, classify_distribution, cluster_scores, estimate_cluster_count,
                          kappa, kmeans_scores, select_and_weight)
from .baselines import reference_aggregate
from .epoch import EpochArtifacts, build_epoch
from .ledger import Ledger, LedgerError
from .model import ConfusionMatrix, Dataset, LocalModel, SyntheticTask, cosine_score, evaluate, \
    flatten_diff, train_local
from .quant import QuantParams, QuantTensor, derive_quant_params, dequantize, quantize, \
    quantized_aggregate, quantized_update
from .proof import AggregationProof, SamplingTranscript, derive_seed, prove, sample_indices, setup, \
    vdf_eval, vdf_verify, verify
from .scoring import commit_update, score_exchange, verify_opening

__version__ = "0.1.0"
