import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError

logger = logging.getLogger(__name__)

METHODS = ("supervised", "selftrain", "ssl")
_METHOD_ALIASES = {"self_train": "selftrain", "self-train": "selftrain"}


def canonical_method(name: str) -> str:
    name = _METHOD_ALIASES.get(name.strip().lower(), name.strip().lower())
    if name not in METHODS:
        raise ConfigError(f"método desconhecido: {name} (use {', '.join(METHODS)})")
    return name


class OptimizerConfig(BaseModel):
    """L-BFGS em lote com busca linear de Armijo por retrocesso"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    memory: int = Field(10, ge=1)
    max_iterations: int = Field(200, ge=1)
    grad_tolerance: float = Field(1e-5, gt=0)
    armijo_c1: float = Field(1e-4, gt=0, lt=1)
    backtrack_shrink: float = Field(0.5, gt=0, lt=1)
    max_line_search_steps: int = Field(30, ge=1)
    # queda relativa mínima em stall_period iterações; 0 desliga
    stall_delta: float = Field(1e-7, ge=0)
    stall_period: int = Field(10, ge=1)


class MadConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mu1: float = Field(1.0, ge=0)
    mu2: float = Field(0.01, ge=0)
    mu3: float = Field(0.01, ge=0)
    max_sweeps: int = Field(30, ge=1)
    convergence_eps: float = Field(1e-4, gt=0)

    @model_validator(mode="after")
    def _seed_or_prior(self):
        # nós isolados sem semente nem prior tornam o sistema singular
        if self.mu1 + self.mu3 <= 0:
            raise ValueError("mu1 + mu3 deve ser > 0")
        return self


class SslConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(0.1, ge=0, le=1)
    eta: float = Field(0.1, ge=0)
    gamma: float = Field(0.01, ge=0)
    knn_k: int = Field(10, ge=1)
    max_outer_iterations: int = Field(10, ge=1)
    convergence_threshold: float = Field(0.001, ge=0)
    mad: MadConfig = MadConfig()
    optimizer: OptimizerConfig = OptimizerConfig()


class RunConfig(BaseModel):
    """Configuração plana de uma execução; chaves do arquivo 1:1 com os campos"""
    model_config = ConfigDict(extra="forbid")

    # caminhos
    train: Optional[Path] = None
    test: Optional[Path] = None
    unlabeled: Optional[Path] = None
    lexicon: Optional[Path] = None
    model_out: Optional[Path] = None
    report_out: Optional[Path] = None
    pdf_out: Optional[Path] = None

    # protocolo
    method: str = "ssl"
    methods: List[str] = Field(default_factory=lambda: list(METHODS))
    fractions: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3])
    repeats: int = Field(10, ge=1)
    labeled_fraction: float = Field(1.0, gt=0, le=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    seed: int = 1
    synthetic_count: int = Field(2000, ge=1)

    # ssl
    alpha: float = Field(0.1, ge=0, le=1)
    eta: float = Field(0.1, ge=0)
    gamma: float = Field(0.01, ge=0)
    knn_k: int = Field(10, ge=1)
    max_outer_iterations: int = Field(10, ge=1)
    convergence_threshold: float = Field(0.001, ge=0)

    # propagação
    mu1: float = Field(1.0, ge=0)
    mu2: float = Field(0.01, ge=0)
    mu3: float = Field(0.01, ge=0)
    max_sweeps: int = Field(30, ge=1)
    convergence_eps: float = Field(1e-4, gt=0)

    # otimizador
    memory: int = Field(10, ge=1)
    max_iterations: int = Field(200, ge=1)
    grad_tolerance: float = Field(1e-5, gt=0)
    armijo_c1: float = Field(1e-4, gt=0, lt=1)
    backtrack_shrink: float = Field(0.5, gt=0, lt=1)
    max_line_search_steps: int = Field(30, ge=1)
    stall_delta: float = Field(1e-7, ge=0)
    stall_period: int = Field(10, ge=1)

    @field_validator("methods", "fractions", mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        return value

    @field_validator("method")
    @classmethod
    def _method(cls, value: str) -> str:
        return canonical_method(value)

    @field_validator("methods")
    @classmethod
    def _methods(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("methods não pode ser vazio")
        out = []
        for name in value:
            name = canonical_method(name)
            if name not in out:
                out.append(name)
        return out

    @field_validator("fractions")
    @classmethod
    def _fractions(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("fractions não pode ser vazio")
        if any(not 0 < f <= 1 for f in value):
            raise ValueError(f"frações devem estar em (0,1]: {value}")
        return value

    @model_validator(mode="after")
    def _seed_or_prior(self):
        if self.mu1 + self.mu3 <= 0:
            raise ValueError("mu1 + mu3 deve ser > 0")
        return self

    def to_optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(**self.model_dump(include=set(OptimizerConfig.model_fields)))

    def to_mad_config(self) -> MadConfig:
        return MadConfig(**self.model_dump(include=set(MadConfig.model_fields)))

    def to_ssl_config(self) -> SslConfig:
        fields = set(SslConfig.model_fields) - {"mad", "optimizer"}
        return SslConfig(
            **self.model_dump(include=fields),
            mad=self.to_mad_config(),
            optimizer=self.to_optimizer_config(),
        )

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Arquivo 'chave = valor' (se houver) e depois as opções da linha de comando"""
        values: Dict[str, Any] = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"arquivo de configuração não encontrado: {path}")
            parsed = dotenv_values(path, interpolate=False)
            missing = [k for k, v in parsed.items() if v is None]
            if missing:
                raise ConfigError(f"{path}: chaves sem valor: {', '.join(missing)}")
            values.update(parsed)
            logger.info(f"📋 Configuração lida de {path} ({len(values)} chaves)")
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"configuração inválida: {problems}")
