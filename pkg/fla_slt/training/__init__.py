from fla_slt.training.checkpoint import TrainState, load_checkpoint, save_checkpoint
from fla_slt.training.schedule import cosine_lr
from fla_slt.training.stages import StageResult, load_stage1_model, run_joint_e2e, run_stage1, run_stage2
from fla_slt.training.trainer import StageConfig, Trainer, matched_budget
