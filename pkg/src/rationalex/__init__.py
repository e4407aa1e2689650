"""Instance-level rationale extraction and erasure-based faithfulness evaluation.

Given a trained text classifier, this library scores token importance with
seven methods, extracts rationales whose erasure moves the model's output
distribution the most, and lets the scoring method, rationale length and
rationale type be chosen per instance instead of fixed dataset-wide.
Normalized sufficiency, normalized comprehensiveness and masked F1 quantify
how faithful the result is.
"""

from .corpus import (
    DataFormatError,
    EncodedInstance,
    Instance,
    Vocab,
    build_vocab,
    decode,
    encode,
    encode_dataset,
    load_dataset,
    write_dataset,
)
from .divergence import class_diff, jsd, kl, perplexity
from .faithfulness import (
    FaithfulnessReport,
    InstanceEval,
    ablate_scorers,
    build_report,
    evaluate_instance,
    masked_f1,
    normalized_comprehensiveness,
    normalized_sufficiency,
    relative_improvement,
)
from .harness import (
    ExperimentConfig,
    ReportBundle,
    emit_report,
    oracle_check,
    parse_config,
    run_ablation,
    run_experiment,
)
from .model import (
    GradientBundle,
    ModelParams,
    Prediction,
    TrainConfig,
    accuracy,
    backward,
    forward,
    load_params,
    save_params,
    train,
)
from .scorers import (
    METHOD_NAMES,
    ImportanceScores,
    compute_scores,
    score_attention,
    score_deeplift,
    score_input_x_grad,
    score_integrated_gradients,
    score_lime,
    score_random,
    score_scaled_attention,
)
from .selection import (
    PassCounter,
    Rationale,
    SelectionConfig,
    candidate_delta,
    extract_contiguous,
    extract_topk,
    select_all,
    select_length,
    select_scorer,
)
from .synthetic import SyntheticSpec, generate_corpus, split_corpus

__version__ = "0.1.0"
