"""Geometry-guided distillation of 2D open-vocabulary features into a 3D point encoder."""

from ._ggsd import (
    Benchmark,
    CameraView,
    Config,
    DataError,
    GgsdError,
    NumericError,
    PointCloud,
    Scene,
    TextBank,
    UsageError,
    assign_pseudo_labels,
    compute_superpoints,
    fuse_views,
    infer_labels,
    load_ply,
    load_tensor,
    loss_contrastive,
    loss_pixel_point,
    loss_superpoint,
    make_benchmark,
    miou_macc,
    run_ablation,
    save_ply,
    save_tensor,
    set_num_threads,
    superpoint_purity,
    superpoint_vote,
)

__all__ = [name for name in dir() if not name.startswith("_")]
