"""Evidential sparse-voxel semantic mapping.

Per-point class-evidence vectors become subjective-logic opinions, get
discounted by a sparse spatial kernel, and are Dempster-combined into a
sparse voxel grid, yielding per-cell labels and a vacuity-based uncertainty.
A kernel-weighted Dirichlet count baseline, a synthetic scene generator,
file formats, and an evaluation harness (mIoU, ECE, AUSE, rank correlation)
round out the pipeline.
"""

from evmap.evidence import (
    BeliefAssignment,
    ClassEvidence,
    DirichletParams,
    SingularOpinionError,
    UncertaintyMeasures,
    belief_to_dirichlet,
    dirichlet_to_belief,
    dirichlet_variance,
    evidence_to_dirichlet,
    expected_probabilities,
    projected_probabilities,
    pseudo_evidence_from_probs,
    uncertainty_measures,
    vacuous_mass,
)
from evmap.fusion import TotalConflictError, combine, conflict, discount, fuse_sequence
from evmap.kernel import KernelParams, neighbor_cells, normalized_weight, sparse_kernel
from evmap.mapio import (
    GroundTruthGrid,
    LoadedMap,
    PipelineConfig,
    export_map,
    import_map,
    load_config,
    load_ground_truth,
    save_config,
    save_ground_truth,
)
from evmap.metrics import (
    accuracy_and_miou,
    compare_report,
    confusion_matrix,
    expected_calibration_error,
    load_report,
    sparsification_ause,
    spearman_uncertainty_error,
)
from evmap.sbki import SbkiCellState, SbkiMap, sbki_predict_label, sbki_uncertainty
from evmap.scan import ScanFormatError, ScanFrame, load_scan, save_scan, transform_to_world
from evmap.synth import SynthParams, generate_synthetic_sequence, high_noise_preset
from evmap.voxmap import (
    CellState,
    IntegrationStats,
    MapConfig,
    VoxelMap,
    cell_center,
    cell_uncertainty,
    predict_label,
    world_to_cell,
)

__version__ = "0.1.0"
