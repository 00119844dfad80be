from fla_slt.common.config.bound import BoundConfig, validate_config
from fla_slt.common.config.config_validator import ConfigValidator
from fla_slt.common.config.unbound import Config
