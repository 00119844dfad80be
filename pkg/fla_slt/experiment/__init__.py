from fla_slt.experiment.ablation import AXES, AblationRunner, AblationSetting, ablation_settings, run_ablation
from fla_slt.experiment.experiment_config import ExperimentConfig
