from fla_slt.models.adapter import MlpAdapter
from fla_slt.models.backend import PretrainConfig, Seq2SeqBackend, TinySeq2SeqBackend, pretrain_tiny_backend
from fla_slt.models.features import FeatureSequence, Tap
from fla_slt.models.llm_stage import (
    FeatureTap,
    FreezePolicy,
    SignToTextModel,
    apply_freeze,
    build_finetune_model,
    build_stage1_model,
    finetune_forward,
)
from fla_slt.models.losses import label_smoothed_ce
from fla_slt.models.transformer import EncoderDecoderTransformer, LightTConfig, TransformerConfig, build_light_t
from fla_slt.models.visual_encoder import VisualEncoder, VisualEncoderConfig, downsample_video, visual_forward
