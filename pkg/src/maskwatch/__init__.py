"""maskwatch: mask-adherence analytics over social-media face/mask
detection records.

ROI fit scoring, time-bucketed adherence aggregation, and the statistical
battery (Mann-Kendall trends, lag-searched correlations, Welch's t-tests
around policy dates), with a CLI front door.
"""

__version__ = "0.1.0"

from .aggregate import (
    PCT_GROUP,
    PCT_MASKED,
    PCT_MASKED_IN_GROUP,
    DailyAggregate,
    MetricSeries,
    aggregate_day,
    bucket_series,
    celebrity_share,
    merge,
    percentage,
)
from .errors import MaskwatchError
from .fitscore import (
    ClsMetrics,
    FitHistogram,
    SegMetrics,
    bin_scores,
    classification_metrics,
    fit_score,
    segmentation_metrics,
    share_above,
)
from .geometry import (
    BitMask,
    LandmarkSet,
    Polygon,
    RoiRegion,
    build_roi_raster,
    convex_hull,
    polygon_area,
    rasterize,
    roi_landmark_indices,
)
from .records import (
    CaseSeries,
    FaceRecord,
    MaskLabel,
    PolicyEvent,
    PolicyKind,
    PostRecord,
    StudyConfig,
    classify_blm,
    default_study_config,
    is_celebrity,
    parse_case_series,
    parse_posts,
    serialize_post,
)
from .stats import (
    CorrelationResult,
    SampleSummary,
    TrendResult,
    WelchResult,
    lag_max_correlation,
    mann_kendall,
    normal_cdf,
    pearson,
    spearman,
    student_t_cdf,
    welch,
)
from .studies import (
    CohortComparison,
    PolicyEffectReport,
    blm_comparison,
    correlation_study,
    policy_effect,
    split_before_after,
    trend_study,
)
from .synth import CityParams, SynthCorpus, SynthParams, generate_corpus
