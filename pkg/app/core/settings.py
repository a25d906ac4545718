from pydantic import BaseModel
from functools import lru_cache
import os
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseModel):
    env: str = os.getenv("ENV", "dev")
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_format: str = os.getenv("LOG_FORMAT", "json").lower()
    # Chat-completions endpoint
    llm_base_url: str = os.getenv("CONSENSUS_LLM_BASE_URL", "http://127.0.0.1:8765/v1")
    llm_model: str = os.getenv("CONSENSUS_LLM_MODEL", "gpt-3.5-turbo")
    llm_api_key_env: str = os.getenv("CONSENSUS_LLM_API_KEY_ENV", "CONSENSUS_LLM_API_KEY")
    llm_timeout_seconds: float = float(os.getenv("CONSENSUS_LLM_TIMEOUT_SECONDS", "30"))
    llm_retry_limit: int = int(os.getenv("CONSENSUS_LLM_RETRY_LIMIT", "3"))
    llm_backoff_base: float = float(os.getenv("CONSENSUS_LLM_BACKOFF_BASE", "0.5"))
    llm_parallelism: int = int(os.getenv("CONSENSUS_LLM_PARALLELISM", "4"))
    # Strategy backend calibration
    noise_sigma_t07: float = float(os.getenv("CONSENSUS_NOISE_SIGMA_T07", "1.5"))
    # Analysis defaults
    eps_exact: float = float(os.getenv("CONSENSUS_EPS_EXACT", "1e-6"))
    eps_noisy: float = float(os.getenv("CONSENSUS_EPS_NOISY", "0.5"))
    cluster_gap: float = float(os.getenv("CONSENSUS_CLUSTER_GAP", "5.0"))
    osc_window: int = int(os.getenv("CONSENSUS_OSC_WINDOW", "4"))
    osc_tolerance: float = float(os.getenv("CONSENSUS_OSC_TOL", "0.5"))
    # Mock server
    mock_host: str = os.getenv("CONSENSUS_MOCK_HOST", "127.0.0.1")
    mock_port: int = int(os.getenv("CONSENSUS_MOCK_PORT", "8765"))

    def llm_api_key(self) -> str | None:
        """Resolve the API key from the configured environment variable at call time."""
        return os.getenv(self.llm_api_key_env)

    def validate_startup(self, uses_llm: bool = False) -> None:
        problems = []
        if uses_llm and not self.llm_api_key():
            problems.append(f"LLM backend configured but {self.llm_api_key_env} is not set")
        if self.llm_retry_limit < 0:
            problems.append("CONSENSUS_LLM_RETRY_LIMIT must be >= 0")
        if self.llm_parallelism < 1:
            problems.append("CONSENSUS_LLM_PARALLELISM must be >= 1")
        if self.log_format not in ("json", "console"):
            problems.append(f"LOG_FORMAT {self.log_format!r} unknown, falling back to json")
        if problems:
            import warnings
            for p in problems:
                warnings.warn(p)

@lru_cache
def get_settings() -> Settings:
    return Settings()
