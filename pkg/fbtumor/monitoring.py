"""
FBTumor - Solver Metrics

In-process counters and timers for the numerical layers: exact G
evaluations and cache hits in the evolution cache, shooting iterations,
critical-radius solves, CLI commands and sweep points.

Version: 1.0.0
"""

from __future__ import annotations

import logging
import statistics
import threading
import time
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')

# Samples kept per histogram key.
HISTOGRAM_WINDOW = 1000


class MetricsCollector:
    """
    Counters, gauges and histograms keyed by name plus optional tags.

    One lock guards all three tables; sweep points evaluated inline share
    the process-wide collector.
    """

    def __init__(self, window: int = HISTOGRAM_WINDOW) -> None:
        self._window = window
        self._counters: Dict[str, float] = {}
        self._gauges: Dict[str, float] = {}
        self._histograms: Dict[str, List[float]] = {}
        self._lock = threading.Lock()
        self._created = time.monotonic()

    @staticmethod
    def key(name: str, tags: Optional[Dict[str, str]] = None) -> str:
        """``name`` or ``name:k1=v1,k2=v2`` with tags sorted by key."""
        if not tags:
            return name
        return name + ":" + ",".join(f"{k}={v}" for k, v in sorted(tags.items()))

    def increment(self, name: str, value: float = 1.0, tags: Optional[Dict[str, str]] = None) -> None:
        key = self.key(name, tags)
        with self._lock:
            self._counters[key] = self._counters.get(key, 0.0) + value

    def gauge(self, name: str, value: float, tags: Optional[Dict[str, str]] = None) -> None:
        key = self.key(name, tags)
        with self._lock:
            self._gauges[key] = value

    def histogram(self, name: str, value: float, tags: Optional[Dict[str, str]] = None) -> None:
        """Append a sample; only the most recent ``window`` samples are kept."""
        key = self.key(name, tags)
        with self._lock:
            samples = self._histograms.setdefault(key, [])
            samples.append(value)
            if len(samples) > self._window:
                del samples[:-self._window]

    def timer(self, name: str, tags: Optional[Dict[str, str]] = None) -> "Timer":
        """Context manager recording elapsed seconds into histogram ``name``."""
        return Timer(self, name, tags)

    def counter(self, name: str, tags: Optional[Dict[str, str]] = None) -> float:
        with self._lock:
            return self._counters.get(self.key(name, tags), 0.0)

    def get_stats(self, name: str, tags: Optional[Dict[str, str]] = None) -> Dict[str, float]:
        """
        Summary of one histogram.

        Returns:
            count, min, max, mean, median and total; empty when no samples
        """
        with self._lock:
            samples = list(self._histograms.get(self.key(name, tags), ()))
        return _summarize(samples)

    def get_all_metrics(self) -> Dict[str, Any]:
        """Snapshot for debug logs and sidecars."""
        with self._lock:
            counters = dict(self._counters)
            gauges = dict(self._gauges)
            histograms = {key: list(samples) for key, samples in sorted(self._histograms.items())}
        return {
            "counters": counters,
            "gauges": gauges,
            "histograms": {key: _summarize(samples) for key, samples in histograms.items()},
            "uptime_seconds": time.monotonic() - self._created,
        }


def _summarize(samples: List[float]) -> Dict[str, float]:
    if not samples:
        return {}
    return {
        "count": len(samples),
        "min": min(samples),
        "max": max(samples),
        "mean": statistics.mean(samples),
        "median": statistics.median(samples),
        "total": sum(samples),
    }


class Timer:
    """
    Wall-clock timer for a block.

    Usage:
        with metrics.timer("growth_eval_seconds") as t:
            growth_functional(R, params)
        t.elapsed
    """

    def __init__(self, collector: MetricsCollector, name: str, tags: Optional[Dict[str, str]] = None) -> None:
        self.collector = collector
        self.name = name
        self.tags = tags
        self.started: Optional[float] = None
        self.elapsed: Optional[float] = None

    def __enter__(self) -> "Timer":
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc: Any) -> None:
        if self.started is None:
            return
        self.elapsed = time.perf_counter() - self.started
        self.collector.histogram(self.name, self.elapsed, self.tags)


# Process-wide collector behind @timed and the CLI summary.
METRICS = MetricsCollector()


def timed(metric_name: str, tags: Optional[Dict[str, str]] = None) -> Callable[[Callable[..., T]], Callable[..., T]]:
    """Record each call's wall time in ``METRICS`` under ``metric_name``."""
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            with METRICS.timer(metric_name, tags):
                return func(*args, **kwargs)
        return wrapper
    return decorator
