"""Query autocomplete ranking: retrieval, neural re-ranking, and bias-aware training data."""

from .catalog import QueryRecord, generate_catalog, load_catalog, save_catalog
from .errors import (
    ConfigurationError,
    DatasetError,
    DuplicateQueryError,
    LayoutMismatchError,
    QacError,
    TrainingDivergedError,
)
from .evaluation import EvalReport, evaluate
from .experiment import ExperimentConfig, ExperimentReport, run_mix_experiment
from .features import (
    DEVICE_TYPES,
    ContextSignals,
    FeatureExtractor,
    FeatureLayout,
    ScalarStandardizer,
    ScalerStats,
    apply_scaler,
    fit_scaler,
)
from .index import Candidate, PrefixIndex, build_index, load_index, save_index
from .ranker import (
    LinearRanker,
    NeuralRanker,
    PopularityRanker,
    RankerModel,
    TrainConfig,
    TrainingInstance,
    event_loss,
    init_model,
    load_model,
    pairwise_accuracy,
    save_model,
    score,
    score_candidates,
    train,
    train_linear_baseline,
)
from .service import (
    LatencySummary,
    SuggestRequest,
    SuggestResponse,
    SuggestService,
    bench_latency,
    create_app,
)
from .simulate import (
    ClickModelConfig,
    QACEngagementEntry,
    QacSimStats,
    SearchLogEntry,
    simulate_qac_sessions,
    simulate_search_logs,
)
from .training_data import (
    MixRatio,
    PrefixLengthDistribution,
    build_real_instances,
    estimate_distribution,
    generate_synthetic,
    mix_datasets,
    sample_prefix,
)

__version__ = "0.1.0"
