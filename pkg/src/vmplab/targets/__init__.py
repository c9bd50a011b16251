from .base import (
    BlockSpec,
    PsiPoint,
    TargetModel,
    gbi_log_joint,
    identity_block,
    mixed_block,
    sigmoid_block,
    smi_analysis_log_target,
    smi_pow_log_target,
    softplus_block,
)
from .hpv import HpvData, load_hpv_data, make_hpv_model
from .location import LocationData, make_location_model, simulate_location_data
from .random_effects import (
    PSI_TRUE,
    RandomEffectsData,
    make_random_effects_model,
    simulate_random_effects,
)
from .toy import conjugate_log_evidence, conjugate_posterior, make_conjugate_gaussian_model

__all__ = [
    "BlockSpec",
    "PsiPoint",
    "TargetModel",
    "HpvData",
    "LocationData",
    "RandomEffectsData",
    "PSI_TRUE",
    "gbi_log_joint",
    "smi_pow_log_target",
    "smi_analysis_log_target",
    "identity_block",
    "mixed_block",
    "sigmoid_block",
    "softplus_block",
    "load_hpv_data",
    "make_hpv_model",
    "make_location_model",
    "simulate_location_data",
    "make_random_effects_model",
    "simulate_random_effects",
    "make_conjugate_gaussian_model",
    "conjugate_posterior",
    "conjugate_log_evidence",
]
