"""Per-replication measurements and their across-replication summary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def t_halfwidth(values, conf: float = 0.95) -> float:
    """Half-width of the Student-t confidence interval for the mean of ``values``."""
    x = [float(v) for v in values]
    k = len(x)
    if k < 2:
        return math.nan
    mean = _mean(x)
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in x) / (k - 1))
    if sd == 0.0:
        return 0.0
    return float(stats.t.ppf(0.5 + conf / 2.0, k - 1) * sd / math.sqrt(k))


def _mean(values) -> float:
    # fsum keeps the result independent of replication order
    values = list(values)
    return math.fsum(values) / len(values)


@dataclass
class RunMetrics:
    """Measured quantities of one replication, or of several after ``summarize``.

    Counts are cumulative from slot 0 to the end of the measurement window, so
    ``delivered_count <= generated_count`` per flow. ``per_node_throughput``
    is the delivery rate inside the window (after warm-up).
    """

    delay_samples: np.ndarray
    generated_count: np.ndarray
    delivered_count: np.ndarray
    slots_observed: int
    mean_delay: float
    per_node_throughput: float
    undelivered: int = 0
    replications: int = 1
    ci95_halfwidth: float = math.nan
    throughput_ci95: float = math.nan
    replication_means: list = field(default_factory=list)
    replication_throughputs: list = field(default_factory=list)

    @property
    def ci_available(self) -> bool:
        return not math.isnan(self.ci95_halfwidth)

    def to_record(self) -> dict:
        return {
            "mean_delay_slots": self.mean_delay,
            "ci95": None if math.isnan(self.ci95_halfwidth) else self.ci95_halfwidth,
            "per_node_throughput": self.per_node_throughput,
            "throughput_ci95": None if math.isnan(self.throughput_ci95) else self.throughput_ci95,
            "replications": self.replications,
            "slots": self.slots_observed,
            "packets": int(self.delay_samples.size),
            "undelivered": self.undelivered,
        }


def summarize(runs: list[RunMetrics]) -> RunMetrics:
    """Mean of per-replication means with a t-based 95% CI (NaN for fewer than 2 runs)."""
    if not runs:
        raise ValueError("summarize needs at least one replication")
    means = [r.mean_delay for r in runs]
    thr = [r.per_node_throughput for r in runs]
    return RunMetrics(
        delay_samples=np.concatenate([r.delay_samples for r in runs]),
        generated_count=np.sum([r.generated_count for r in runs], axis=0),
        delivered_count=np.sum([r.delivered_count for r in runs], axis=0),
        slots_observed=runs[0].slots_observed,
        mean_delay=_mean(means),
        per_node_throughput=_mean(thr),
        undelivered=sum(r.undelivered for r in runs),
        replications=len(runs),
        ci95_halfwidth=t_halfwidth(means),
        throughput_ci95=t_halfwidth(thr),
        replication_means=means,
        replication_throughputs=thr,
    )
