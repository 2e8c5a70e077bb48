"""Static highway network data structures and their validation.

The network is a set of directed segments, single-route ramp-to-ramp paths,
and OD pairs carrying subsample demand. Everything is immutable after
construction; all downstream modules share one validated snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateId,
    InvalidAssignment,
    InvalidPath,
    InvalidSegment,
    MissingReference,
    NegativeDemand,
)


@dataclass(frozen=True)
class Segment:
    """Directed highway segment.

    Attributes
    ----------
    id:
        Opaque identifier, unique within the network.
    length_km:
        Segment length in km, > 0.
    lanes:
        Number of lanes, >= 1.
    v_max_kmh:
        Maximum (free-flow) speed in km/h.
    v_min_kmh:
        Minimum speed in km/h; strictly positive so travel times stay finite,
        and strictly below v_max_kmh.
    """

    id: str
    length_km: float
    lanes: int
    v_max_kmh: float
    v_min_kmh: float


@dataclass(frozen=True)
class Path:
    """Ramp-to-ramp route: an ordered sequence of segment ids.

    A path never revisits a segment; a repeated id is treated as a data
    error and rejected at snapshot construction.
    """

    id: str
    segment_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        # normalize lists coming from parsers
        object.__setattr__(self, "segment_ids", tuple(self.segment_ids))


@dataclass(frozen=True)
class ODPair:
    """Origin-destination pair with its single assigned path.

    ``subsample_demand_vph`` is the observed subsample demand in veh/h,
    before any upscaling.
    """

    id: str
    path_id: str
    subsample_demand_vph: float


class AssignmentMatrix:
    """Sparse mapping (segment id, od id) -> traversal probability.

    Stored as one entry list per OD pair, since single-route ODs make the
    matrix extremely sparse. Entries derived from paths are exactly 1.0;
    general probabilities in [0, 1] are accepted when supplied explicitly.
    """

    def __init__(self, entries_by_od: Mapping[str, Iterable[tuple[str, float]]]):
        frozen = {od: tuple(items) for od, items in entries_by_od.items()}
        for od, items in frozen.items():
            for seg, value in items:
                if not (0.0 <= value <= 1.0):
                    raise InvalidAssignment(
                        f"assignment entry ({seg}, {od}) = {value} outside [0, 1]"
                    )
        self._by_od = frozen

    def value(self, segment_id: str, od_id: str) -> float:
        """Return a_ij for (segment i, od j); absent entries are 0."""
        for seg, val in self._by_od.get(od_id, ()):
            if seg == segment_id:
                return val
        return 0.0

    def od_entries(self, od_id: str) -> tuple[tuple[str, float], ...]:
        return self._by_od.get(od_id, ())

    def items(self) -> Iterator[tuple[str, str, float]]:
        """Yield (segment id, od id, value) for every stored entry."""
        for od, items in self._by_od.items():
            for seg, val in items:
                yield seg, od, val

    @property
    def nonzero_count(self) -> int:
        return sum(len(items) for items in self._by_od.values())


@dataclass(frozen=True)
class NetworkSnapshot:
    """Validated, immutable view of segments, paths, OD pairs and assignment."""

    segments: Mapping[str, Segment]
    paths: Mapping[str, Path]
    od_pairs: Mapping[str, ODPair]
    assignment: AssignmentMatrix = field(repr=False)


def _check_unique(ids: Iterable[str], kind: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate {kind} id {i!r}")
        seen.add(i)


def _validate_segment(seg: Segment) -> None:
    if seg.length_km <= 0:
        raise InvalidSegment(f"segment {seg.id!r}: length_km must be > 0")
    if seg.lanes < 1 or int(seg.lanes) != seg.lanes:
        raise InvalidSegment(f"segment {seg.id!r}: lanes must be an integer >= 1")
    if seg.v_min_kmh <= 0:
        raise InvalidSegment(f"segment {seg.id!r}: v_min_kmh must be > 0")
    if seg.v_min_kmh >= seg.v_max_kmh:
        raise InvalidSegment(
            f"segment {seg.id!r}: requires 0 < v_min_kmh < v_max_kmh"
        )


def build_snapshot(
    segments: Iterable[Segment],
    paths: Iterable[Path],
    od_pairs: Iterable[ODPair],
    assignment: AssignmentMatrix | None = None,
) -> NetworkSnapshot:
    """Validate raw collections and assemble an immutable snapshot.

    The assignment matrix is derived from the paths (entry 1.0 for every
    segment on each OD's path) unless an explicit probability matrix is
    supplied, which is validated against the same referential rules.

    Raises
    ------
    DuplicateId, InvalidSegment, InvalidPath, MissingReference,
    NegativeDemand, InvalidAssignment
    """
    segments = list(segments)
    paths = list(paths)
    od_pairs = list(od_pairs)

    _check_unique((s.id for s in segments), "segment")
    _check_unique((p.id for p in paths), "path")
    _check_unique((o.id for o in od_pairs), "od")

    for seg in segments:
        _validate_segment(seg)
    seg_map = {s.id: s for s in segments}

    for path in paths:
        if not path.segment_ids:
            raise InvalidPath(f"path {path.id!r} has no segments")
        seen: set[str] = set()
        for sid in path.segment_ids:
            if sid not in seg_map:
                raise MissingReference(
                    f"path {path.id!r} references unknown segment {sid!r}"
                )
            if sid in seen:
                raise DuplicateId(
                    f"path {path.id!r} repeats segment {sid!r}"
                )
            seen.add(sid)
    path_map = {p.id: p for p in paths}

    for od in od_pairs:
        if od.path_id not in path_map:
            raise MissingReference(
                f"od {od.id!r} references unknown path {od.path_id!r}"
            )
        if od.subsample_demand_vph < 0:
            raise NegativeDemand(
                f"od {od.id!r} has negative demand {od.subsample_demand_vph}"
            )
    od_map = {o.id: o for o in od_pairs}

    if assignment is None:
        assignment = AssignmentMatrix(
            {
                od.id: [(sid, 1.0) for sid in path_map[od.path_id].segment_ids]
                for od in od_pairs
            }
        )
    else:
        for seg_id, od_id, _ in assignment.items():
            if seg_id not in seg_map:
                raise MissingReference(
                    f"assignment references unknown segment {seg_id!r}"
                )
            if od_id not in od_map:
                raise MissingReference(
                    f"assignment references unknown od {od_id!r}"
                )

    return NetworkSnapshot(
        segments=MappingProxyType(seg_map),
        paths=MappingProxyType(path_map),
        od_pairs=MappingProxyType(od_map),
        assignment=assignment,
    )


def segment_demand_coefficients(snapshot: NetworkSnapshot) -> dict[str, float]:
    """Per-segment demand coefficients c_i = sum_j a_ij * d_j.

    Segment demand under a scaling factor x is then simply x * c_i, so the
    coefficients are computed once and reused across evaluations. Segments
    on no path map to 0.
    """
    coeffs = {sid: 0.0 for sid in snapshot.segments}
    for od in snapshot.od_pairs.values():
        demand = od.subsample_demand_vph
        if demand == 0.0:
            continue
        for seg_id, a in snapshot.assignment.od_entries(od.id):
            coeffs[seg_id] += a * demand
    return coeffs
