from __future__ import annotations

import os
from dataclasses import dataclass

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover
    def load_dotenv() -> None:
        return None


load_dotenv()


@dataclass(frozen=True)
class Settings:
    """Centralized runtime configuration for simulation engines and outputs.

    Experiment parameters live in `app.cli.schemas.ExperimentConfig`; these are
    the process-wide knobs that do not change the meaning of a result.
    """

    app_name: str = os.getenv("APP_NAME", "simplex-qsd")
    output_dir: str = os.getenv("SIMPLEX_QSD_OUTPUT_DIR", "./results")
    log_level: str = os.getenv("LOG_LEVEL", "INFO").strip().upper()
    workers: int = int(os.getenv("SIMPLEX_QSD_WORKERS", "1"))
    rng_chunk_steps: int = int(os.getenv("RNG_CHUNK_STEPS", "512"))
    block_size: int = int(os.getenv("BLOCK_SIZE", "256"))
    simplex_tolerance: float = float(os.getenv("SIMPLEX_TOLERANCE", "1e-12"))
    audit_tolerance: float = float(os.getenv("AUDIT_TOLERANCE", "1e-9"))
    fd_step: float = float(os.getenv("FD_STEP", "1e-5"))
    probe_horizon: float = float(os.getenv("PROBE_HORIZON", "1e4"))
    probe_dt: float = float(os.getenv("PROBE_DT", "0.05"))
    confidence_level: float = float(os.getenv("CONFIDENCE_LEVEL", "0.99"))
    bootstrap_resamples: int = int(os.getenv("BOOTSTRAP_RESAMPLES", "1000"))
    distance_max_points: int = int(os.getenv("DISTANCE_MAX_POINTS", "5000"))
    fv_max_snapshots: int = int(os.getenv("FV_MAX_SNAPSHOTS", "200"))
    sigma_norm_points: int = int(os.getenv("SIGMA_NORM_POINTS", "200"))
    reflect_layer: float = float(os.getenv("REFLECT_LAYER", "1.0"))


settings = Settings()
