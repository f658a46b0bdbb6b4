"""
Application configuration settings.
Loads a key-value config file and environment variables and provides typed configuration.
"""

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple
import json
import logging

from dotenv import dotenv_values
from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """
    Toolkit settings with every default embedded.
    Any key can be overridden by a config file, the environment or a CLI flag.
    """

    model_config = SettingsConfigDict(case_sensitive=True, extra="ignore")

    # App settings
    APP_NAME: str = "MDCSA Indoor Localisation Toolkit"
    VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False
    MDCSA_OUTPUT_ROOT: str = "runs"
    SEED: int = 42
    N_JOBS: int = 1

    # Cohort and day grid
    SIM_N_PAIRS: int = Field(12, ge=1)
    SIM_DAYS: int = Field(5, ge=1)
    DAY_START_HOUR: int = 6
    DAY_END_HOUR: int = 22
    SLOT_HOURS: int = 4

    # Radio propagation
    PATH_LOSS_P0: float = -40.0
    PATH_LOSS_D0: float = 1.0
    PATH_LOSS_EXPONENT: float = 2.5
    WALL_ATTENUATION_DB: float = 5.0
    FLOOR_ATTENUATION_DB: float = 10.0
    SHADOWING_STD_DB: float = Field(4.0, ge=0)
    RECEPTION_FLOOR_DBM: float = -100.0
    WEARABLE_OFFSET_M: float = 0.3
    FLOOR_HEIGHT_M: float = 2.7
    RSSI_HZ: int = 5
    ACCEL_HZ: int = 30

    # Behaviour
    DWELL_MEAN_S: Dict[str, float] = {
        "living": 600.0,
        "kitchen": 360.0,
        "dining": 300.0,
        "stairs": 60.0,
        "porch": 60.0,
    }
    DWELL_JITTER: float = Field(0.2, ge=0, lt=1)
    WALK_SPEED_HC: Tuple[float, float] = (1.0, 1.3)
    WALK_SPEED_PD_ON: Tuple[float, float] = (0.8, 1.1)
    OFF_SLOWDOWN: Tuple[float, float] = (0.5, 0.75)
    TREMOR_AMPLITUDE_PD: Tuple[float, float] = (0.3, 1.5)
    TREMOR_FREQ_HZ: Tuple[float, float] = (4.0, 6.0)
    OFF_TREMOR_GAIN: float = 1.5

    # Accelerometry
    GRAVITY: float = 9.81
    WALK_FREQ_HZ: float = 2.0
    WALK_AMPLITUDE: float = 1.5
    KITCHEN_BURST_AMPLITUDE: float = 2.0
    KITCHEN_BURST_FREQ_HZ: float = 3.0
    DWELL_ACCEL_STD: float = Field(0.05, ge=0)
    ACCEL_NOISE_STD: float = Field(0.05, ge=0)

    # Camera annotation coverage
    ANNOTATION_START_HOUR: float = 10.0
    ANNOTATION_HOURS: float = Field(2.5, gt=0)

    # Preprocessing
    WINDOW_STEPS: int = 25
    RSSI_MISSING_DBM: float = -120.0
    TOP_AP_COUNT: int = 4

    # Network
    KERNELS: List[int] = [1, 4, 7]
    DROPOUT: float = Field(0.15, ge=0, lt=1)

    # Training
    GRID_D: List[int] = [128, 256]
    GRID_EPOCHS: List[int] = [200, 300]
    GRID_LR: List[float] = [0.01, 0.0001]
    BATCH_SIZE: int = Field(32, ge=1)
    PATIENCE: int = Field(20, ge=1)
    VAL_FRACTION: float = Field(0.1, gt=0, lt=1)
    LOOKAHEAD_K: int = Field(5, ge=1)
    LOOKAHEAD_ALPHA: float = Field(0.5, gt=0, le=1)
    BUDGET_WINDOWS: int = Field(48, ge=1)

    # Random forest localisation baseline
    RF_GRID_TREES: List[int] = [200, 250]
    RF_GRID_MIN_LEAF: List[int] = [1, 5]
    RF_GRID_WARM_START: List[bool] = [True, False]
    RF_CV_FOLDS: int = Field(3, ge=2)

    # Medication-state classifier
    MED_N_TREES: int = Field(200, ge=1)
    MED_MIN_LEAF: int = Field(1, ge=1)
    FOLD_MED_COLUMNS: bool = True

    # Statistics
    ALPHA: float = Field(0.05, gt=0, lt=1)

    @field_validator("KERNELS")
    @classmethod
    def validate_kernels(cls, v):
        """Kernel list must be non-empty with sizes >= 1."""
        if not v or any(k < 1 for k in v):
            raise ValueError("KERNELS must be a non-empty list of sizes >= 1")
        return v

    @field_validator("GRID_D", "GRID_EPOCHS", "GRID_LR", "RF_GRID_TREES", "RF_GRID_MIN_LEAF")
    @classmethod
    def validate_grid(cls, v):
        """Grid axes must be non-empty and positive."""
        if not v or any(x <= 0 for x in v):
            raise ValueError("grid values must be positive and non-empty")
        return v

    @model_validator(mode="after")
    def validate_day_grid(self):
        """The day span must split evenly into slots."""
        span = self.DAY_END_HOUR - self.DAY_START_HOUR
        if span <= 0 or span % self.SLOT_HOURS:
            raise ValueError("DAY_END_HOUR - DAY_START_HOUR must be a positive multiple of SLOT_HOURS")
        if self.ACCEL_HZ % self.RSSI_HZ:
            raise ValueError("ACCEL_HZ must be a multiple of RSSI_HZ")
        return self

    @property
    def slots_per_day(self) -> int:
        return (self.DAY_END_HOUR - self.DAY_START_HOUR) // self.SLOT_HOURS

    @property
    def tick_ms(self) -> int:
        return 1000 // self.RSSI_HZ

    def dump(self, path: Path) -> Path:
        """
        Write the effective configuration as a key-value file.

        Args:
            path: Destination file

        Returns:
            Path: The written file
        """
        lines = [f"# {self.APP_NAME} configuration v1"]
        for key, value in self.model_dump().items():
            if isinstance(value, str):
                lines.append(f'{key}="{value}"')
            else:
                lines.append(f"{key}={json.dumps(value)}")
        path = Path(path)
        path.write_text("\n".join(lines) + "\n")
        return path


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """
    Parse repeated KEY=VALUE flags.

    Args:
        pairs: Raw flag values

    Returns:
        dict: Overrides keyed by setting name
    """
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"Override must look like KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in Settings.model_fields:
            raise ConfigurationError(f"Unknown setting: {key}")
        overrides[key] = value.strip()
    return overrides


def _decode(key: str, raw: Any) -> Any:
    """Decode a string override the way an env value would be decoded."""
    if not isinstance(raw, str):
        return raw
    annotation = Settings.model_fields[key].annotation
    if annotation is str:
        return raw
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Settings:
    """
    Build settings from defaults, a config file, the environment and overrides.

    Args:
        config_path: Optional key-value config file
        overrides: Highest-priority values

    Returns:
        Settings: Validated settings
    """
    kwargs = {key: _decode(key, value) for key, value in (overrides or {}).items()}
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.is_file():
            raise ConfigurationError(f"Config file not found: {config_path}")
        unknown = [k for k in dotenv_values(config_path) if k not in Settings.model_fields]
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return Settings(_env_file=str(config_path), **kwargs)
        except ValueError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e
    try:
        return Settings(**kwargs)
    except ValueError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


# Default settings instance
settings = Settings()
