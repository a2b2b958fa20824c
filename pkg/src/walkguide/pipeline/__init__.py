from ..labels import parse_reco_label
from .answers import (
    TAGS,
    descriptions_from_numbered,
    emit_training_sample,
    format_path_array,
    parse_answer,
    parse_numbered_answer,
    parse_sample,
    render_answer,
)
from .config import MODES, REGION_STYLES, PipelineConfig
from .describe import (
    PromptRecorder,
    SceneContext,
    describe_scene,
    describe_scene_multi_turn,
    describe_scene_single_turn,
    encode_png,
    prepare_scene,
    slot_bundle,
)
from .run import (
    RunSummary,
    ScenesFailed,
    load_predictions,
    run_generation,
    run_predictions,
    scene_seed,
    write_dataset,
)
