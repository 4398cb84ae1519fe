"""Dynamic spectral risk measures: scoring functions, oracles and training runs."""

import os
from pathlib import Path

_data = Path(__file__).resolve().parent / "data"
if _data.is_dir():
    os.environ.setdefault("DYNRISK_DATA_DIR", str(_data))

from ._core import (  # noqa: E402
    CheckpointError,
    ConfigError,
    ScoreDomainError,
    Spectrum,
    SpectrumError,
    TreeStructureError,
    empirical_cvar,
    empirical_spectral,
    empirical_var,
    evaluate,
    preset,
    run_oracle_suite,
    score_cvar,
    score_spectral,
    static_precommitment,
    train,
    tree_dynamic_risk,
    validate_config,
    weighted_risk,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "ScoreDomainError",
    "Spectrum",
    "SpectrumError",
    "TreeStructureError",
    "empirical_cvar",
    "empirical_spectral",
    "empirical_var",
    "evaluate",
    "preset",
    "run_oracle_suite",
    "score_cvar",
    "score_spectral",
    "static_precommitment",
    "train",
    "tree_dynamic_risk",
    "validate_config",
    "weighted_risk",
]
