"""Recovery of partially permuted columns in union-of-subspaces data.

Typical use::

    from pmsdr import SynthConfig, build_dataset, PipelineConfig, run_pipeline, evaluate_run
    bundle = build_dataset(SynthConfig(), rng_seed=0)
    run = run_pipeline(bundle.corrupted, PipelineConfig(n_out=int(bundle.outlier_mask.sum())))
    report = evaluate_run(run, bundle)
"""
from .classify import EliminationSchedule, build_schedule, classify_outlier, eliminate, subspace_distance
from .cluster import SubspaceModel, affinity_from_selfrep, estimate_basis, spectral_clustering
from .detect import random_walk_scores, split_by_gap, split_by_known_ratio
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .metrics import EvaluationReport, align_labels
from .pipeline import PipelineConfig, evaluate_run, run_pipeline, sweep
from .recover import recover_matrix, recover_outlier
from .selfrep import ElasticNetParams, self_representation, solve_elastic_net_column, transition_matrix
from .synth import DatasetBundle, PartialPermutation, SynthConfig, build_dataset, generate_basis

__version__ = "0.1.0"
