"""RF frame-pair selection for quasi-static strain imaging.

Simulates deforming-phantom RF sequences, tracks integer axial displacement
on sparse lines with dynamic programming, compresses the tracks into PCA
basis weights, classifies pair quality with a small MLP, and selects the
best partner frame inside a sliding window.
"""

from .dptrack import DpParams, SparseDisplacement, dp_displacement, select_lines, sparse_track
from .features import FeatureVector, extract_features, extract_features_batch, solve_lsq
from .mlp import MlpModel, Prediction, TrainConfig, init_model, load_model, predict, save_model, train
from .pcabasis import PcaBasis, downsample, fit_pca, load_basis, sample_basis, save_basis
from .pipeline import EvalTable, SelectionResult, evaluate_sequence, select_pair
from .quality import StrainImage, cnr, dense_displacement, lsq_strain, snr
from .rfsim import (
    DeformationParams,
    Inclusion,
    PsfParams,
    RfFrame,
    ScattererPhantom,
    SequenceGroundTruth,
    deform,
    make_motion_script,
    make_phantom,
    read_rfb,
    render_rf,
    simulate_sequence,
    write_rfb,
)

__version__ = "0.1.0"

__all__ = [
    "DeformationParams",
    "DpParams",
    "EvalTable",
    "FeatureVector",
    "Inclusion",
    "MlpModel",
    "PcaBasis",
    "Prediction",
    "PsfParams",
    "RfFrame",
    "ScattererPhantom",
    "SelectionResult",
    "SequenceGroundTruth",
    "SparseDisplacement",
    "StrainImage",
    "TrainConfig",
    "cnr",
    "deform",
    "dense_displacement",
    "downsample",
    "dp_displacement",
    "evaluate_sequence",
    "extract_features",
    "extract_features_batch",
    "fit_pca",
    "init_model",
    "load_basis",
    "load_model",
    "lsq_strain",
    "make_motion_script",
    "make_phantom",
    "predict",
    "read_rfb",
    "render_rf",
    "sample_basis",
    "save_basis",
    "save_model",
    "select_lines",
    "select_pair",
    "simulate_sequence",
    "snr",
    "solve_lsq",
    "sparse_track",
    "train",
    "write_rfb",
]
