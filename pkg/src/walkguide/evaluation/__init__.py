from .judge import (
    CATEGORIES,
    DEFAULT_JUDGE_MODEL,
    EvalConfig,
    EvalReport,
    JudgeVerdict,
    evaluate_run,
    judge_description,
    match_predictions,
)
from .metrics import (
    embedding_f1,
    go_stop_accuracy,
    lcs_length,
    meteor_lite,
    parse_rating,
    rouge_l,
    stem,
    tokenize,
    word_count,
)
from .report import delta_row, fmt2, render_comparison, render_report, report_row
