"""Regional max/average pooling with a learned aggregation head, trained with
the nonlinear rank approximation loss, plus whitening and retrieval tools."""

from .errors import (
    BatchCompositionError,
    ContractError,
    DaracError,
    DimensionError,
    DomainError,
    FormatError,
    ProtocolError,
)
from .head import (
    HeadForwardCache,
    HeadGradients,
    HeadParams,
    embed,
    head_backward,
    head_forward,
    head_init,
    head_param_count,
)
from .losses import NraAux, NraConfig, TripletConfig, nra_loss, nra_loss_grad, nra_transfer, pairwise_l2, triplet_loss
from .pooling import PoolingVariant, baseline_descriptor, pool_region, pooled_matrix
from .postprocess import (
    WhiteningModel,
    apply_whitening,
    fit_whitening,
    fuse_multiresolution,
    l2_normalize,
    l2_normalize_rows,
)
from .regions import Region, RegionGrid, darac_grid, rmac_regions, with_global
from .retrieval import Query, RetrievalIndex, average_precision, class_protocol, evaluate_map, knn
from .tensors import FeatureMapSet, make_rng, new_feature_maps
from .training import (
    BatchSpec,
    Item,
    LabeledDataset,
    OptimizerState,
    ToyExtractor,
    TrainConfig,
    augment,
    build_batch,
    darac_pooled,
    pooled_dataset,
    sgd_step,
    toy_extract,
    train,
)

__version__ = "0.1.0"
