"""crpsbin: conditional distributions by CRPS-optimal contiguous binning.

Sort observations by a scalar covariate, choose bin boundaries that
minimize the total leave-one-out CRPS (exactly, by dynamic programming),
pick the bin count on a held-out split, and serve the within-bin empirical
CDFs as predictive distributions with finite-sample conformal prediction
sets and Venn bands on top.
"""

__version__ = "0.1.0"

from .baseline import OlsModel, SplitConformalModel, calibrate, ols_fit, predict_interval
from .conformal import (
    BinReference,
    PredictionSet,
    SearchConfig,
    VennBand,
    augmented_cost_identity,
    crps_score,
    knn_score,
    p_value,
    prediction_set,
    venn_band,
)
from .cost_matrix import CapacityError, CostMatrix, check_quadrangle, naive_w, precompute
from .crps import DispersionStats, bin_cost, cramer_distance, crps_ecdf, dispersion, loo_crps_obs
from .dataset import (
    SortedDataset,
    SplitPair,
    alternating_split,
    gen_bimodal,
    gen_heteroscedastic,
    load_csv,
)
from .estimator import BinnedConformalRegressor
from .model_select import KCurve, LooCurve, select_k, test_crps
from .partition import (
    InfeasiblePartitionError,
    Partition,
    brute_force_partition,
    optimal_partition,
    partition_cost,
)

__all__ = [
    "__version__",
    "BinnedConformalRegressor",
    "BinReference",
    "CapacityError",
    "CostMatrix",
    "DispersionStats",
    "InfeasiblePartitionError",
    "KCurve",
    "LooCurve",
    "OlsModel",
    "Partition",
    "PredictionSet",
    "SearchConfig",
    "SortedDataset",
    "SplitConformalModel",
    "SplitPair",
    "VennBand",
    "alternating_split",
    "augmented_cost_identity",
    "bin_cost",
    "brute_force_partition",
    "calibrate",
    "check_quadrangle",
    "cramer_distance",
    "crps_ecdf",
    "crps_score",
    "dispersion",
    "gen_bimodal",
    "gen_heteroscedastic",
    "knn_score",
    "load_csv",
    "loo_crps_obs",
    "naive_w",
    "ols_fit",
    "optimal_partition",
    "p_value",
    "partition_cost",
    "precompute",
    "prediction_set",
    "predict_interval",
    "select_k",
    "test_crps",
    "venn_band",
]
