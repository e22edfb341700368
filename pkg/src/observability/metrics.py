"""Prometheus metrics for experiment runs.

A dedicated registry keeps experiment metrics apart from the default
process collectors; it is pushed to a Pushgateway once a run completes.
"""

from typing import Optional

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    push_to_gateway,
)

from src.observability.logging_config import get_logger

logger = get_logger(__name__)


class ExperimentMetrics:
    """Counters and histograms describing finished episodes."""

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()
        self.episodes_total = Counter(
            "avsearch_episodes_total",
            "Finished episodes by outcome",
            ["outcome"],
            registry=self.registry,
        )
        self.episode_steps = Histogram(
            "avsearch_episode_steps",
            "Steps taken per episode",
            buckets=(1, 2, 3, 5, 8, 12, 16, 20, 25, 30),
            registry=self.registry,
        )
        self.experiment_seconds = Gauge(
            "avsearch_experiment_seconds",
            "Wall-clock duration of the last experiment",
            registry=self.registry,
        )

    def record_episode(self, outcome: str, steps: int) -> None:
        self.episodes_total.labels(outcome=outcome).inc()
        self.episode_steps.observe(steps)

    def push(self, gateway: str, job: str = "avsearch") -> None:
        """Push the registry; failures are logged, never raised."""
        try:
            push_to_gateway(gateway, job=job, registry=self.registry)
            logger.info("metrics_pushed", extra={"gateway": gateway, "job": job})
        except OSError as e:
            logger.warning(
                "metrics_push_failed", extra={"gateway": gateway, "error": str(e)}
            )
