"""Unsupervised image segmentation over patch-feature similarity graphs.

A per-image similarity graph is built from patch embeddings, a small graph
network is trained against a modularity objective, and the resulting
two-way clustering is painted into a full-resolution binary mask.
"""

from .autodiff import ACTIVATIONS, Tape, Tensor
from .config import PipelineConfig, config_from_sources, parse_kv_file
from .errors import (
    ConfigError,
    DegenerateGraphError,
    DegenerateInputError,
    DivergenceError,
    FormatError,
    GraphSegError,
    JobError,
    NonFiniteError,
    ShapeError,
    TapeStateError,
)
from .evaluate import DatasetReport, evaluate_dataset, write_report
from .graph import (
    FeatureMatrix,
    ModularityMatrix,
    PatchGraph,
    build_adjacency,
    graph_from_adjacency,
    modularity_matrix,
    row_normalize,
)
from .metrics import IoUBreakdown, iou
from .model import (
    ArmaConfig,
    ArmaModel,
    ClusterAssignment,
    arma_forward,
    cluster_head,
    init_model,
    load_model,
    save_model,
)
from .objective import (
    AdamState,
    LossReport,
    OptimConfig,
    adam_step,
    collapse_regularizer,
    hard_modularity,
    max_bipartition_modularity,
    relaxed_modularity,
    segmentation_loss,
    train,
)
from .pipeline import (
    SegJob,
    SegMask,
    SegResult,
    assemble_mask,
    refine_mask,
    run_image,
    select_foreground,
    write_job_outputs,
)
from .pgm import read_mask, read_pgm, write_pgm
from .sparse import CsrMatrix
from .ufv import read_ufv1, write_ufv1

__version__ = "0.1.0"
