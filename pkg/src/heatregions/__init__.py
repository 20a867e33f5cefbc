"""Candidate object regions from saliency heatmaps, with a top-3 DIoU evaluation harness."""

from .activation import ComponentLabeling, RegionCount, active_mask, count_regions, label_components
from .clustering import (
    Cluster,
    FeatureGrid,
    KMeansConfig,
    KMeansResult,
    build_feature_grid,
    empty_cluster_repair,
    gaussian_smooth,
    kmeans,
    kmeans_points,
    postprocess_clusters,
)
from .evaluation import EvalReport, MatchOutcome, evaluate_manifest, match_score, match_top3
from .heatmap_io import (
    BoundingBox,
    Heatmap,
    ManifestEntry,
    ManifestError,
    ValidationError,
    load_heatmap,
    parse_manifest,
    render_overlay,
    save_heatmap,
)
from .ranking import RankingConfig, ScoredCluster, cluster_activation, propose_regions, rank_clusters, tight_box
from .synth import BlobSpec, SynthScene, generate

__version__ = "0.1.0"
