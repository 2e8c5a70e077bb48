"""Error metrics for comparing predictions against observations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import EmptyCollection, ZeroBaseline, ZeroBenchmark, ZeroGroundTruthSum


class ObservationKind(Enum):
    COUNTS = "counts"
    TRAVEL_TIMES = "travel_times"


@dataclass(frozen=True)
class PairedObservations:
    """Per-entity (ground truth, estimate) pairs of one kind.

    Entries are (entity id, ground truth, estimate) triples; ids identify
    segments for counts and paths for travel times.
    """

    kind: ObservationKind
    entries: tuple[tuple[str, float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(tuple(e) for e in self.entries))
        for eid, gt, _ in self.entries:
            if gt < 0:
                raise ValueError(f"ground truth for {eid!r} must be >= 0, got {gt}")

    @classmethod
    def from_pairs(cls, kind: ObservationKind,
                   ground_truth: Mapping[str, float],
                   estimates: Mapping[str, float],
                   ids: Iterable[str] | None = None) -> PairedObservations:
        """Align two mappings on ids (defaults: ground truth's keys)."""
        keys: Sequence[str] = list(ids) if ids is not None else list(ground_truth)
        return cls(kind=kind, entries=tuple(
            (k, ground_truth[k], estimates[k]) for k in keys
        ))

    def __len__(self) -> int:
        return len(self.entries)


def nrmse(obs: PairedObservations) -> float:
    """Root mean squared error normalized by the ground-truth mean, in %.

    Computed as |S| / sum(ground truth) * sqrt(mean squared residual) * 100,
    which equals RMSE over the ground-truth mean.
    """
    n = len(obs)
    if n == 0:
        raise EmptyCollection("nrmse of zero observations")
    total = math.fsum(gt for _, gt, _ in obs.entries)
    if total == 0:
        raise ZeroGroundTruthSum("ground-truth values sum to zero")
    sq = math.fsum((est - gt) ** 2 for _, gt, est in obs.entries)
    return n / total * math.sqrt(sq / n) * 100.0


def pct_improvement(nrmse_baseline: float, nrmse_model: float) -> float:
    """Relative error reduction of a model over the baseline, in %."""
    if nrmse_baseline == 0:
        raise ZeroBaseline("baseline nrmse is zero")
    return (nrmse_baseline - nrmse_model) / nrmse_baseline * 100.0


def pct_gap(nrmse_proposed: float, nrmse_benchmark: float) -> float:
    """Signed relative deviation of the proposed error from the benchmark's.

    Near zero means the proposal matches the benchmark standard; positive
    means it falls short of it.
    """
    if nrmse_benchmark == 0:
        raise ZeroBenchmark("benchmark value is zero")
    return (nrmse_proposed - nrmse_benchmark) / nrmse_benchmark * 100.0


def round_half_away_from_zero(value: float) -> int:
    """Round with .5 going away from zero, the convention used in reports."""
    return int(math.floor(abs(value) + 0.5)) * (1 if value >= 0 else -1)
