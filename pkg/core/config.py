import logging
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

ModelT = TypeVar("ModelT", bound=BaseModel)


class Settings(BaseSettings):
    LOG_LEVEL: str = Field(default="INFO")
    OUTPUT_DIR: str = Field(default="runs")
    RESERVED_BLOCKS_PATH: str = Field(default=str(DATA_DIR / "reserved_blocks.json"))
    HOST: str = Field(default="0.0.0.0")
    PORT: int = Field(default=8001)

    model_config = SettingsConfigDict(env_file=".env", env_prefix="COLLAB_", extra="ignore")


settings = Settings()


def read_key_value_file(path: str) -> Dict[str, str]:
    """
    Read a plain-text key=value configuration file.

    Blank lines and '#' comments are ignored; keys are lower-cased so a
    file may use either FIELD or field spelling.
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    values = dotenv_values(config_path)
    return {key.strip().lower(): value for key, value in values.items() if value is not None}


def build_model(model: Type[ModelT], *layers: Optional[Dict[str, Any]]) -> ModelT:
    """
    Validate a pydantic model from layered dictionaries.

    Later layers override earlier ones; None values in a layer are skipped
    so unset command-line flags never mask config-file values. A model may
    list extra accepted keys in a flat_keys class attribute.
    """
    merged: Dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        merged.update({key: value for key, value in layer.items() if value is not None})

    known = set(model.model_fields) | set(getattr(model, "flat_keys", ()))
    unknown = sorted(set(merged) - known)
    if unknown:
        logger.warning(f"Ignoring unknown {model.__name__} keys: {', '.join(unknown)}")
        merged = {key: value for key, value in merged.items() if key in known}

    try:
        return model.model_validate(merged)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {model.__name__}: {e}") from e


def load_model(model: Type[ModelT], path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ModelT:
    """Load a model from an optional key-value file plus overrides."""
    file_values = read_key_value_file(path) if path else None
    return build_model(model, file_values, overrides)
