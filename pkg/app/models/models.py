"""Pydantic schemas for experiment configs, records and analysis reports.

Everything that crosses a file boundary (config JSON, records.jsonl, summary
JSON, manifests) is one of these models.
"""
from __future__ import annotations

from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import StrategySpecError, TimingConfigError

SCHEMA_VERSION = 1
STATE_BOUNDS: Tuple[float, float] = (0.0, 100.0)

# 1-D states are plain numbers, 2-D states are [x, y]
State = Union[float, List[float]]


class StrategyKind(str, Enum):
    AVERAGE_INCLUDE_SELF = "average_include_self"
    AVERAGE_EXCLUDE_SELF = "average_exclude_self"
    SUGGESTIBLE = "suggestible"
    STUBBORN = "stubborn"
    ERRONEOUS = "erroneous"


class Personality(str, Enum):
    NONE = "none"
    STUBBORN = "stubborn"
    SUGGESTIBLE = "suggestible"


class StrategySpec(BaseModel):
    """A rule-based agent: decision rule plus noise and hallucination parameters."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: Literal["strategy"] = "strategy"
    kind: StrategyKind = StrategyKind.AVERAGE_INCLUDE_SELF
    noise_sigma: float = Field(0.0, ge=0.0)
    hallucination_rate: float = Field(0.0, ge=0.0, le=1.0)
    wrapped_kind: Optional[StrategyKind] = None

    @model_validator(mode="after")
    def _check_wrapped(self) -> "StrategySpec":
        if self.kind == StrategyKind.ERRONEOUS:
            if self.wrapped_kind is None:
                raise StrategySpecError("erroneous strategy needs a wrapped_kind")
            if self.wrapped_kind == StrategyKind.ERRONEOUS:
                raise StrategySpecError("wrapped_kind cannot itself be erroneous")
        return self

    def label(self) -> str:
        if self.kind == StrategyKind.ERRONEOUS:
            return f"{self.kind.value}({self.wrapped_kind.value})"
        return self.kind.value


class LLMAgentSpec(BaseModel):
    """A conversational agent driven through a chat-completions endpoint."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: Literal["llm"] = "llm"
    personality: Personality = Personality.NONE
    model: Optional[str] = None
    temperature: float = Field(0.7, ge=0.0, le=2.0)
    retry_limit: Optional[int] = Field(None, ge=0)
    history_window: Optional[int] = Field(None, ge=2)


AgentSpec = Annotated[Union[StrategySpec, LLMAgentSpec], Field(discriminator="backend")]


class PopulationEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(..., ge=1)
    spec: AgentSpec


class ChatEndpointSpec(BaseModel):
    """Where and how to reach the chat-completions server. Holds the key's variable name, never the key."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    base_url: str
    api_key_env: str = "CONSENSUS_LLM_API_KEY"
    timeout_seconds: float = Field(30.0, gt=0)
    model: str = "gpt-3.5-turbo"
    retry_limit: int = Field(3, ge=0)
    backoff_base: float = Field(0.5, ge=0)
    parallelism: int = Field(4, ge=1)

    @classmethod
    def from_settings(cls, **overrides) -> "ChatEndpointSpec":
        from app.core.settings import get_settings

        s = get_settings()
        values = dict(
            base_url=s.llm_base_url,
            api_key_env=s.llm_api_key_env,
            timeout_seconds=s.llm_timeout_seconds,
            model=s.llm_model,
            retry_limit=s.llm_retry_limit,
            backoff_base=s.llm_backoff_base,
            parallelism=s.llm_parallelism,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class TopologySpec(BaseModel):
    """Either a named builder with parameters or an explicit row-major 0/1 grid."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    builder: Literal["full", "leader_follower", "chain", "partial", "explicit"] = "full"
    n: Optional[int] = Field(None, ge=1)
    leader: int = 0
    removed_edges: List[Tuple[int, int]] = Field(default_factory=list)
    symmetric: bool = True
    matrix: Optional[List[List[int]]] = None

    @model_validator(mode="after")
    def _check_matrix(self) -> "TopologySpec":
        if self.builder == "explicit" and self.matrix is None:
            raise ValueError("explicit topology needs a matrix")
        if self.builder != "explicit" and self.matrix is not None:
            raise ValueError("matrix is only allowed with builder 'explicit'")
        return self

    def size(self) -> Optional[int]:
        if self.matrix is not None:
            return len(self.matrix)
        if self.builder == "partial":
            return 3
        return self.n


class GroupKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_a: int
    noise_profile: str


class ExperimentConfig(BaseModel):
    """Parameters of one batch of experiments (n_e runs of n_a agents for n_r rounds)."""
    model_config = ConfigDict(extra="forbid")

    n_e: int = Field(1, ge=1)
    n_a: int = Field(..., ge=1)
    n_r: int = Field(9, ge=0)
    topology: TopologySpec = Field(default_factory=TopologySpec)
    agents: List[AgentSpec] = Field(default_factory=list)
    population: Optional[List[PopulationEntry]] = None
    dimension: Literal[1, 2] = 1
    seed: int = Field(0, ge=0, lt=2**64)
    init_range: Tuple[float, float] = STATE_BOUNDS
    init_states: Optional[List[State]] = None
    clamp: bool = True
    early_stop_eps: Optional[float] = Field(None, gt=0)
    parallelism: int = Field(1, ge=1)
    llm_endpoint: Optional[ChatEndpointSpec] = None
    group: Optional[GroupKey] = None

    @model_validator(mode="after")
    def _check_sizes(self) -> "ExperimentConfig":
        if self.population and not self.agents:
            expanded: List = []
            for entry in self.population:
                expanded.extend([entry.spec] * entry.count)
            self.agents = expanded
        if len(self.agents) != self.n_a:
            raise ValueError(f"agents has {len(self.agents)} entries but n_a is {self.n_a}")
        size = self.topology.size()
        if size is not None and size != self.n_a:
            raise ValueError(f"topology size {size} does not match n_a {self.n_a}")
        lo, hi = self.init_range
        if not lo < hi:
            raise ValueError(f"init_range lower bound {lo} must be below upper bound {hi}")
        if self.init_states is not None:
            if len(self.init_states) != self.n_a:
                raise ValueError(f"init_states has {len(self.init_states)} entries but n_a is {self.n_a}")
            for k, state in enumerate(self.init_states):
                values = state if isinstance(state, list) else [state]
                if len(values) != self.dimension:
                    raise ValueError(f"init_states[{k}] has dimension {len(values)}, expected {self.dimension}")
                if any(not lo <= v <= hi for v in values):
                    raise ValueError(f"init_states[{k}]={state} lies outside init_range [{lo}, {hi}]")
        if self.uses_llm() and self.llm_endpoint is None:
            self.llm_endpoint = ChatEndpointSpec.from_settings()
        return self

    def uses_llm(self) -> bool:
        return any(isinstance(a, LLMAgentSpec) for a in self.agents)

    def bounds(self) -> Optional[Tuple[float, float]]:
        return self.init_range if self.clamp else None


class Decision(BaseModel):
    agent: int
    state: State
    reasoning: str
    error: Optional[str] = None
    attempts: int = 1


class RoundRecord(BaseModel):
    round: int
    states_before: List[State]
    decisions: List[Decision]
    states_after: List[State]


class ExperimentRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    experiment: int
    seed: int
    config_fingerprint: str
    group: Optional[GroupKey] = None
    initial_states: List[State]
    rounds: List[RoundRecord] = Field(default_factory=list)
    final_states: List[State]
    fallbacks: int = 0

    def to_json_line(self) -> str:
        return self.model_dump_json(by_alias=True)


class ConvergenceReport(BaseModel):
    experiment: int
    consensus: bool
    consensus_value: Optional[State] = None
    convergence_round: Optional[int] = None
    final_spread: float
    bias: State


class OscillationReport(BaseModel):
    experiment: int
    oscillating: bool
    period: Optional[int] = None
    participants: List[int] = Field(default_factory=list)


class Cluster(BaseModel):
    representative: State
    members: List[int]
    spread: float = 0.0


class ClusterReport(BaseModel):
    clusters: List[Cluster] = Field(default_factory=list)
    gap: float
    eps: float


class MonteCarloSummary(BaseModel):
    n_a: int
    noise_profile: str
    trials: int
    mean_bias: float
    var_bias: float
    consensus_rate: float
    mean_round: Optional[float] = None


class SimTimingConfig(BaseModel):
    """Planner and controller periods of the robot simulation, in seconds."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    planner_period: float = Field(2.0, gt=0)
    controller_period: float = Field(0.1, gt=0)
    t_end: float = Field(20.0, gt=0)

    @model_validator(mode="after")
    def _check_periods(self) -> "SimTimingConfig":
        if self.planner_period < self.controller_period:
            raise TimingConfigError("planner_period must be >= controller_period")
        ratio = self.planner_period / self.controller_period
        if abs(ratio - round(ratio)) > 1e-9:
            raise TimingConfigError(
                f"planner_period {self.planner_period} is not an integer multiple of controller_period {self.controller_period}"
            )
        steps = self.t_end / self.controller_period
        if abs(steps - round(steps)) > 1e-9:
            raise TimingConfigError(f"t_end {self.t_end} is not an integer multiple of controller_period")
        return self

    @property
    def steps_per_plan(self) -> int:
        return int(round(self.planner_period / self.controller_period))

    @property
    def total_steps(self) -> int:
        return int(round(self.t_end / self.controller_period))


class ControllerGains(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k_p: float = Field(1.0, gt=0)
    v_max: float = Field(5.0, gt=0)


DEFAULT_ROBOT_POSITIONS: List[Tuple[float, float]] = [(10.0, 10.0), (90.0, 10.0), (10.0, 90.0), (90.0, 90.0)]


class RobotsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_robots: int = Field(4, ge=1)
    initial_positions: Optional[List[Tuple[float, float]]] = None
    planner: AgentSpec = Field(default_factory=StrategySpec)
    planners: Optional[List[AgentSpec]] = None
    topology: TopologySpec = Field(default_factory=TopologySpec)
    timing: SimTimingConfig = Field(default_factory=SimTimingConfig)
    gains: ControllerGains = Field(default_factory=ControllerGains)
    seed: int = Field(0, ge=0, lt=2**64)
    parallelism: int = Field(1, ge=1)
    llm_endpoint: Optional[ChatEndpointSpec] = None

    @model_validator(mode="after")
    def _check_robots(self) -> "RobotsConfig":
        if self.initial_positions is None:
            if self.n_robots != len(DEFAULT_ROBOT_POSITIONS):
                raise ValueError(f"initial_positions required for n_robots={self.n_robots}")
            self.initial_positions = list(DEFAULT_ROBOT_POSITIONS)
        if len(self.initial_positions) != self.n_robots:
            raise ValueError(
                f"initial_positions has {len(self.initial_positions)} entries but n_robots is {self.n_robots}"
            )
        if self.planners is not None and len(self.planners) != self.n_robots:
            raise ValueError(f"planners has {len(self.planners)} entries but n_robots is {self.n_robots}")
        size = self.topology.size()
        if size is not None and size != self.n_robots:
            raise ValueError(f"topology size {size} does not match n_robots {self.n_robots}")
        if self.llm_endpoint is None and any(isinstance(p, LLMAgentSpec) for p in self.planner_specs()):
            self.llm_endpoint = ChatEndpointSpec.from_settings()
        return self

    def planner_specs(self) -> List:
        return list(self.planners) if self.planners is not None else [self.planner] * self.n_robots


class TrajectorySample(BaseModel):
    time: float
    robot_id: int
    x: float
    y: float
    target_x: float
    target_y: float


class RunManifest(BaseModel):
    command: str
    config_path: Optional[str] = None
    output_dir: str
    parameters: dict = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str
    timestamp: str
    completed: Optional[int] = None
    requested: Optional[int] = None
    fallbacks: int = 0
    status: str = "running"
    metrics: dict = Field(default_factory=dict)
