import threading
from typing import Dict

_lock = threading.Lock()
_requests: Dict[str, int] = {}
_lat_total: Dict[str, float] = {}
_retries: Dict[str, int] = {}
_fallbacks: Dict[str, int] = {}

def record(endpoint: str, duration_ms: int, status: int) -> None:
    key = f"{endpoint}|{status}"
    with _lock:
        _requests[key] = _requests.get(key, 0) + 1
        _lat_total[endpoint] = _lat_total.get(endpoint, 0.0) + duration_ms

def record_retry(reason: str) -> None:
    with _lock:
        _retries[reason] = _retries.get(reason, 0) + 1

def record_fallback(backend: str) -> None:
    with _lock:
        _fallbacks[backend] = _fallbacks.get(backend, 0) + 1

def snapshot() -> Dict[str, Dict[str, float]]:
    with _lock:
        return {
            "requests": dict(sorted(_requests.items())),
            "latency_ms_total": {k: int(v) for k, v in sorted(_lat_total.items())},
            "retries": dict(sorted(_retries.items())),
            "fallbacks": dict(sorted(_fallbacks.items())),
        }

def reset() -> None:
    with _lock:
        for store in (_requests, _lat_total, _retries, _fallbacks):
            store.clear()

def render_metrics() -> str:
    snap = snapshot()
    lines = []
    lines.append("# HELP consensus_requests_total Requests by endpoint and status")
    lines.append("# TYPE consensus_requests_total counter")
    for key, count in snap["requests"].items():
        ep, status = key.split("|")
        lines.append(f'consensus_requests_total{{endpoint="{ep}",status="{status}"}} {count}')
    lines.append("# HELP consensus_endpoint_latency_ms_total Total latency by endpoint (ms)")
    lines.append("# TYPE consensus_endpoint_latency_ms_total counter")
    for ep, tot in snap["latency_ms_total"].items():
        lines.append(f'consensus_endpoint_latency_ms_total{{endpoint="{ep}"}} {int(tot)}')
    lines.append("# HELP consensus_llm_retries_total Chat retries by reason")
    lines.append("# TYPE consensus_llm_retries_total counter")
    for reason, cnt in snap["retries"].items():
        lines.append(f'consensus_llm_retries_total{{reason="{reason}"}} {cnt}')
    lines.append("# HELP consensus_backend_fallbacks_total Agents that held their state after a backend failure")
    lines.append("# TYPE consensus_backend_fallbacks_total counter")
    for backend, cnt in snap["fallbacks"].items():
        lines.append(f'consensus_backend_fallbacks_total{{backend="{backend}"}} {cnt}')
    return "\n".join(lines) + "\n"
