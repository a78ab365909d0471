"""Exact Monte Carlo sampling of first-passage times for jump diffusions."""

from .exactcore import (SamplerDiagnostic, Skeleton, StoppedCouple, Telemetry, br1_endpoint,
                        br2_endpoint, cd_endpoint, hz_fpt, sample_br1, sample_br2, sample_cd,
                        sample_hz, sample_sd, sd_stopped)
from .jumpfpt import FptOutcome, OutcomeBatch, jd_fpt, sample_jump_fpt, sjd_fpt
from .model import (DriftSpec, FptProblem, GeneralSde, JumpSpec, ModelError, beta, gamma,
                    lamperti_reduce, validate_bounds)
from .randkit import RngStream

__version__ = "0.1.0"

__all__ = [
    "DriftSpec", "FptOutcome", "FptProblem", "GeneralSde", "JumpSpec", "ModelError",
    "OutcomeBatch", "RngStream", "SamplerDiagnostic", "Skeleton", "StoppedCouple", "Telemetry",
    "beta", "br1_endpoint", "br2_endpoint", "cd_endpoint", "gamma", "hz_fpt", "jd_fpt",
    "lamperti_reduce", "sample_br1", "sample_br2", "sample_cd", "sample_hz", "sample_jump_fpt",
    "sample_sd", "sd_stopped", "sjd_fpt", "validate_bounds",
]
