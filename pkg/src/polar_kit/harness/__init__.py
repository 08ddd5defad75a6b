"""Synthetic-scene harness: generation, pipeline runs, timing, and file I/O."""

from .candidates import CandidateGenSpec, candidate_gt_iou, gen_candidates, oracle_o2o_scores
from .fileio import (
    FORMAT_VERSION,
    quantize,
    read_candidates,
    read_metrics_json,
    read_scene,
    read_scene_dir,
    read_selections,
    write_bench_csv,
    write_candidates,
    write_labels,
    write_metrics_csv,
    write_metrics_json,
    write_scene,
    write_scene_dir,
    write_selections,
)
from .pipeline import (
    MODES,
    BenchRow,
    PipelineResult,
    PipelineRun,
    SceneOutcome,
    assert_shared_candidates,
    bench_suppression,
    quadratic_fit_r2,
    run_pipeline,
    select_candidates,
)
from .scenes import SceneSpec, gen_scene

__all__ = [
    "BenchRow",
    "CandidateGenSpec",
    "FORMAT_VERSION",
    "MODES",
    "PipelineResult",
    "PipelineRun",
    "SceneOutcome",
    "SceneSpec",
    "assert_shared_candidates",
    "bench_suppression",
    "candidate_gt_iou",
    "gen_candidates",
    "gen_scene",
    "oracle_o2o_scores",
    "quadratic_fit_r2",
    "quantize",
    "read_candidates",
    "read_metrics_json",
    "read_scene",
    "read_scene_dir",
    "read_selections",
    "run_pipeline",
    "select_candidates",
    "write_bench_csv",
    "write_candidates",
    "write_labels",
    "write_metrics_csv",
    "write_metrics_json",
    "write_scene",
    "write_scene_dir",
    "write_selections",
]
