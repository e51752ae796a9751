# kgrag/core/config.py
import enum
import json
from pathlib import Path
from typing import Literal, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from kgrag.core.errors import ConfigError


class RetrievalMode(str, enum.Enum):
    PPR_PCST = "ppr_pcst"
    SEMANTIC = "semantic"
    HYBRID = "hybrid"


class RetrievalConfig(BaseModel):
    """Graph retriever hyperparameters; defaults are the selected tuning values."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.15, gt=0, lt=1, description="PPR restart probability")
    max_nodes: int = Field(30, ge=1, description="Node budget of the extracted subgraph")
    max_depth: int = Field(4, ge=1, description="Hop limit for candidates and reasoning paths")
    top_k: int = Field(10, ge=1, description="Semantic candidate count")
    ppr_tolerance: float = Field(1e-10, gt=0, description="L1 convergence threshold of the power iteration")
    ppr_max_iterations: int = Field(1000, ge=1, description="Power iteration cap")
    mode: RetrievalMode = RetrievalMode.PPR_PCST


class NormalizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    fuzzy_threshold: float = Field(0.85, gt=0, le=1, description="Minimum normalized edit similarity")
    semantic_threshold: float = Field(0.8, gt=0, le=1, description="Minimum cosine for the embedding stage")
    link_confidence: float = Field(0.8, gt=0, le=1, description="Minimum score of a query link")


class RunConfig(BaseSettings):
    """Flat run settings: both service configs plus paths and embedder choice.

    Sources are init kwargs and an optional JSON config file; environment
    variables are not read.
    """
    model_config = SettingsConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(0.15, gt=0, lt=1)
    max_nodes: int = Field(30, ge=1)
    max_depth: int = Field(4, ge=1)
    top_k: int = Field(10, ge=1)
    ppr_tolerance: float = Field(1e-10, gt=0)
    ppr_max_iterations: int = Field(1000, ge=1)
    mode: RetrievalMode = RetrievalMode.PPR_PCST

    fuzzy_threshold: float = Field(0.85, gt=0, le=1)
    semantic_threshold: float = Field(0.8, gt=0, le=1)
    link_confidence: float = Field(0.8, gt=0, le=1)

    embedder: Literal["trigram", "sentence-transformers"] = "trigram"
    embedding_model: str = "all-MiniLM-L6-v2"
    embedding_dimension: int = Field(256, ge=8)

    output_path: Optional[Path] = None
    json_path: Optional[Path] = None

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    @classmethod
    def load(cls, config_path: Union[str, Path, None] = None, **overrides) -> "RunConfig":
        """Defaults < config file < overrides (``None`` overrides are ignored)."""
        values = {}
        if config_path is not None:
            path = Path(config_path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            try:
                values = dict(JsonConfigSettingsSource(cls, json_file=path)())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: malformed JSON ({exc.msg})") from exc
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigError(f"invalid configuration: {exc.errors()[0]['loc']}: {exc.errors()[0]['msg']}") from exc

    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(**self.model_dump(include=set(RetrievalConfig.model_fields)))

    def normalizer(self) -> NormalizerConfig:
        return NormalizerConfig(**self.model_dump(include=set(NormalizerConfig.model_fields)))

    def dump(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True)
