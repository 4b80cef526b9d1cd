import hashlib
import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mssk.core.model import ModelParams, validate_params
from mssk.optimize.minimizer import OptimizationConfig
from mssk.rpc.cascade import DEFAULT_MAX_LEAVES, DEFAULT_WIDTH, CascadeConfig


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(Section):
    r: int = 1
    zeta: List[float] = [0.5]
    gamma: List[float] = [1.0]

    @model_validator(mode="after")
    def check_chains(self):
        validate_params(self.to_params())
        return self

    def to_params(self) -> ModelParams:
        return ModelParams(r=self.r, zeta=tuple(self.zeta), gamma=tuple(self.gamma))


class CascadeSection(Section):
    width: int = Field(DEFAULT_WIDTH, ge=2)
    tail_compensation: bool = True
    max_leaves: int = Field(DEFAULT_MAX_LEAVES, ge=1)

    def to_config(self) -> CascadeConfig:
        return CascadeConfig(width=self.width, tail_compensation=self.tail_compensation,
                             max_leaves=self.max_leaves)


class PressureSection(Section):
    n_list: List[int] = [1]
    samples_per_level: int = Field(64, ge=2)
    recursive_replicas: int = Field(200, ge=2)


class ParisiSection(Section):
    xi_free: List[float] = []
    q: Optional[List[float]] = None
    method: Literal["quadrature", "montecarlo", "grid", "grid-mc"] = "quadrature"
    rpc: bool = True


class OptimizerSection(Section):
    k_schedule: List[int] = []
    restarts: int = Field(8, ge=1)
    max_evals: int = Field(2000, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    method: Literal["quadrature", "grid"] = "grid"
    # random trial points checked against p_N by verify-bound
    random_trials: int = Field(20, ge=0)


class GibbsSection(Section):
    n: int = Field(6, ge=1)
    pair_draws: int = Field(1000, ge=1)


class CavitySection(Section):
    n_list: List[int] = [4, 8]
    # c in the c/N telescoping slack; gamma_r^2 when unset
    slack_constant: Optional[float] = None


class GhirlandaGuerraSection(Section):
    n_list: List[int] = [4, 8, 12, 16]
    n: int = Field(2, ge=1)
    p: int = Field(1, ge=1)
    w: List[float] = [0.5, 0.5]
    f: str = "r12"
    samples: int = Field(10, ge=2)

    @field_validator("w")
    @classmethod
    def check_weights(cls, w: List[float]) -> List[float]:
        if len(w) != 2 or any(not 0.0 <= x <= 1.0 for x in w):
            raise ValueError("w must be a pair in [0, 1]^2")
        return w


class LoggingSection(Section):
    verbose: bool = False
    log_dir: str = "logs"


class RunConfig(Section):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    replicas: int = Field(1000, ge=1)
    threads: Optional[int] = Field(None, ge=1)
    out: str = "results"
    model: ModelSection = Field(default_factory=ModelSection)
    cascade: CascadeSection = Field(default_factory=CascadeSection)
    pressure: PressureSection = Field(default_factory=PressureSection)
    parisi: ParisiSection = Field(default_factory=ParisiSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    gibbs: GibbsSection = Field(default_factory=GibbsSection)
    cavity: CavitySection = Field(default_factory=CavitySection)
    ghirlanda_guerra: GhirlandaGuerraSection = Field(default_factory=GhirlandaGuerraSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON of every setting that can change a result."""
        document = self.model_dump(mode="json", exclude={"threads", "logging", "out"})
        canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def optimization_config(self) -> OptimizationConfig:
        return OptimizationConfig(
            k_schedule=tuple(self.optimizer.k_schedule),
            restarts=self.optimizer.restarts,
            max_evals=self.optimizer.max_evals,
            tolerance=self.optimizer.tolerance,
            seed=self.seed,
            method=self.optimizer.method,
            threads=self.threads,
        )
