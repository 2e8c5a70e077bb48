"""Scenario file schemas, parsers, and writers.

A scenario lives in a directory: ``segments.csv``, ``paths.csv``, and
``config.txt`` describe the network and model parameters; per-hour data
(``od.csv``, ``gt_travel_times.csv``, optional ``sensors.csv``) sits
either in ``hours/<label>/`` subdirectories or flat next to the network
files for a single-hour scenario. All CSV files are UTF-8 with a
mandatory header row; column names carry the unit (``length_km``,
``tt_s``), so a renamed unit suffix is rejected explicitly rather than
silently misread.

Ground-truth travel times stay in seconds here; the estimator converts
to hours internally. Sensor counts are parsed only by ``read_sensors``,
which ``parse_scenario`` never calls: estimation cannot see counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ParseError, SchemaError, UnitError
from .estimate import EstimateOptions, GroundTruth
from .flow import ModelParams
from .network import (
    NetworkSnapshot,
    ODPair,
    Path,
    Segment,
    build_snapshot,
)

SEGMENTS_FILE = "segments.csv"
PATHS_FILE = "paths.csv"
CONFIG_FILE = "config.txt"
OD_FILE = "od.csv"
GT_FILE = "gt_travel_times.csv"
SENSORS_FILE = "sensors.csv"
HOURS_DIR = "hours"

SEGMENTS_HEADER = ("id", "length_km", "lanes", "v_max_kmh", "v_min_kmh")
PATHS_HEADER = ("path_id", "seq", "segment_id")
OD_HEADER = ("od_id", "path_id", "demand_vph")
GT_HEADER = ("path_id", "tt_s", "weight")
SENSORS_HEADER = ("segment_id", "count_vph")

_PARAM_KEYS = ("k_jam", "kappa", "alpha1", "alpha2", "x_lower", "x_upper")
_OPTION_KEYS = ("tol_x", "tol_g", "tol_f", "max_iterations", "starts")


@dataclass(frozen=True)
class ScenarioBundle:
    """One hour's worth of input files plus the shared configuration."""

    segments_path: FsPath
    paths_path: FsPath
    od_path: FsPath
    gt_path: FsPath
    params: ModelParams
    options: EstimateOptions
    hour: str
    sensors_path: FsPath | None = None


def _check_header(path: FsPath, got: Sequence[str] | None,
                  expected: Sequence[str]) -> None:
    if got is None:
        raise SchemaError(f"{path}: empty file, expected header "
                          f"{','.join(expected)}")
    got = [c.strip() for c in got]
    if list(got) == list(expected):
        return
    # distinguish a wrong unit suffix from a generally broken header
    if len(got) == len(expected):
        for g, e in zip(got, expected):
            if g == e:
                continue
            g_base, _, g_unit = g.rpartition("_")
            e_base, _, e_unit = e.rpartition("_")
            if g_base == e_base and g_base and g_unit != e_unit:
                raise UnitError(
                    f"{path}: column {g!r} carries unit tag {g_unit!r}, "
                    f"expected {e!r}"
                )
            break
    raise SchemaError(
        f"{path}: header is {','.join(got)}, expected {','.join(expected)}"
    )


def _read_rows(path: FsPath, header: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    """All data rows of a CSV as (line number, column map), header checked."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                first = next(reader)
            except StopIteration:
                first = None
            _check_header(path, first, header)
            rows = []
            for row in reader:
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, got {len(row)}",
                        file=str(path), line=reader.line_num,
                    )
                rows.append((reader.line_num, dict(zip(header, row))))
            return rows
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read file ({exc})") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 ({exc})", file=str(path)) from exc


def _field(path: FsPath, line: int, row: Mapping[str, str], column: str,
           convert: Callable[[str], object]):
    raw = row[column].strip()
    try:
        return convert(raw)
    except ValueError:
        raise ParseError(
            f"cannot parse {raw!r} as {convert.__name__}",
            file=str(path), line=line, column=column,
        ) from None


def _require(condition: bool, path: FsPath, line: int, constraint: str) -> None:
    if not condition:
        raise SchemaError(f"{path}:{line}: {constraint} violated")


def read_segments(path: FsPath) -> list[Segment]:
    segments = []
    seen: set[str] = set()
    for line, row in _read_rows(path, SEGMENTS_HEADER):
        sid = row["id"].strip()
        _require(bool(sid), path, line, "id non-empty")
        _require(sid not in seen, path, line, f"unique id (duplicate {sid!r})")
        seen.add(sid)
        length = _field(path, line, row, "length_km", float)
        lanes = _field(path, line, row, "lanes", int)
        v_max = _field(path, line, row, "v_max_kmh", float)
        v_min = _field(path, line, row, "v_min_kmh", float)
        _require(length > 0, path, line, "length_km > 0")
        _require(lanes >= 1, path, line, "lanes >= 1")
        _require(v_min > 0, path, line, "v_min_kmh > 0")
        _require(v_max > v_min, path, line, "v_max_kmh > v_min_kmh")
        segments.append(Segment(id=sid, length_km=length, lanes=lanes,
                                v_max_kmh=v_max, v_min_kmh=v_min))
    return segments


def read_paths(path: FsPath) -> list[Path]:
    # rows may arrive in any order; seq orders segments within a path
    by_path: dict[str, list[tuple[int, str, int]]] = {}
    for line, row in _read_rows(path, PATHS_HEADER):
        pid = row["path_id"].strip()
        _require(bool(pid), path, line, "path_id non-empty")
        seq = _field(path, line, row, "seq", int)
        _require(seq >= 1, path, line, "seq >= 1")
        by_path.setdefault(pid, []).append((seq, row["segment_id"].strip(), line))
    paths = []
    for pid, entries in by_path.items():
        entries.sort(key=lambda e: e[0])
        seqs = [e[0] for e in entries]
        if len(set(seqs)) != len(seqs):
            dup = next(s for s in seqs if seqs.count(s) > 1)
            raise SchemaError(
                f"{path}: path {pid!r} repeats seq {dup} (unique seq per path)"
            )
        if seqs != list(range(1, len(seqs) + 1)):
            raise SchemaError(
                f"{path}: path {pid!r} seq values {seqs} are not 1..{len(seqs)}"
            )
        paths.append(Path(id=pid, segment_ids=tuple(e[1] for e in entries)))
    return paths


def read_od(path: FsPath) -> list[ODPair]:
    pairs = []
    seen: set[str] = set()
    for line, row in _read_rows(path, OD_HEADER):
        oid = row["od_id"].strip()
        _require(bool(oid), path, line, "od_id non-empty")
        _require(oid not in seen, path, line, f"unique od_id (duplicate {oid!r})")
        seen.add(oid)
        demand = _field(path, line, row, "demand_vph", float)
        _require(demand >= 0, path, line, "demand_vph >= 0")
        pairs.append(ODPair(id=oid, path_id=row["path_id"].strip(),
                            subsample_demand_vph=demand))
    return pairs


def read_ground_truth(path: FsPath) -> tuple[dict[str, float], dict[str, float]]:
    """(travel times in seconds, weights) keyed by path id.

    An empty weight cell means the default weight 1.
    """
    times: dict[str, float] = {}
    weights: dict[str, float] = {}
    for line, row in _read_rows(path, GT_HEADER):
        pid = row["path_id"].strip()
        _require(bool(pid), path, line, "path_id non-empty")
        _require(pid not in times, path, line,
                 f"unique path_id (duplicate {pid!r})")
        tt = _field(path, line, row, "tt_s", float)
        _require(tt > 0, path, line, "tt_s > 0")
        times[pid] = tt
        raw_w = row["weight"].strip()
        w = 1.0 if raw_w == "" else _field(path, line, row, "weight", float)
        _require(w >= 0, path, line, "weight >= 0")
        weights[pid] = w
    return times, weights


def read_sensors(path: FsPath) -> dict[str, float]:
    """Per-segment observed counts (veh/h). Only count validation uses this."""
    counts: dict[str, float] = {}
    for line, row in _read_rows(path, SENSORS_HEADER):
        sid = row["segment_id"].strip()
        _require(bool(sid), path, line, "segment_id non-empty")
        _require(sid not in counts, path, line,
                 f"unique segment_id (duplicate {sid!r})")
        count = _field(path, line, row, "count_vph", float)
        _require(count >= 0, path, line, "count_vph >= 0")
        counts[sid] = count
    return counts


def read_config(path: FsPath) -> tuple[ModelParams, EstimateOptions]:
    """Flat key=value file; '#' starts a comment. kappa is mandatory.

    Model keys: k_jam, kappa, alpha1, alpha2, x_lower, x_upper.
    Optimizer keys: tol_x, tol_g, tol_f, max_iterations, starts.
    Unknown keys are rejected rather than ignored.
    """
    raw: dict[str, str] = {}
    try:
        text = FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read file ({exc})") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError("expected key = value", file=str(path), line=lineno)
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARAM_KEYS and key not in _OPTION_KEYS:
            raise SchemaError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in raw:
            raise SchemaError(f"{path}:{lineno}: duplicate config key {key!r}")
        raw[key] = value
    if "kappa" not in raw:
        raise SchemaError(f"{path}: config must set kappa")

    def _num(key: str, default: float | None = None) -> float | None:
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError:
            raise ParseError(f"cannot parse {raw[key]!r} as float",
                             file=str(path), column=key) from None

    params_kwargs = {}
    for key in _PARAM_KEYS:
        value = _num(key)
        if value is not None:
            params_kwargs[key] = value
    params = ModelParams(**params_kwargs)

    opt_kwargs = {}
    if "tol_x" in raw:
        opt_kwargs["tol_x"] = _num("tol_x")
    if "tol_g" in raw:
        opt_kwargs["tol_g"] = _num("tol_g")
    if "tol_f" in raw:
        opt_kwargs["tol_f"] = _num("tol_f")
    for key, dest in (("max_iterations", "max_iterations"), ("starts", "n_starts")):
        if key in raw:
            try:
                opt_kwargs[dest] = int(raw[key])
            except ValueError:
                raise ParseError(f"cannot parse {raw[key]!r} as int",
                                 file=str(path), column=key) from None
    options = EstimateOptions(**opt_kwargs)
    if options.n_starts < 1:
        raise SchemaError(f"{path}: starts must be >= 1")
    if options.max_iterations < 1:
        raise SchemaError(f"{path}: max_iterations must be >= 1")
    return params, options


def parse_scenario(bundle: ScenarioBundle) -> tuple[NetworkSnapshot, ModelParams, GroundTruth]:
    """Parse one bundle into validated in-memory objects.

    Never touches the sensors file: count data cannot reach the estimator
    through this function.
    """
    segments = read_segments(bundle.segments_path)
    paths = read_paths(bundle.paths_path)
    od_pairs = read_od(bundle.od_path)
    times, weights = read_ground_truth(bundle.gt_path)

    segment_ids = {s.id for s in segments}
    path_ids = {p.id for p in paths}
    for p in paths:
        for sid in p.segment_ids:
            if sid not in segment_ids:
                raise SchemaError(
                    f"{bundle.paths_path}: path {p.id!r} references unknown "
                    f"segment {sid!r}"
                )
    for od in od_pairs:
        if od.path_id not in path_ids:
            raise SchemaError(
                f"{bundle.od_path}: od {od.id!r} references unknown path "
                f"{od.path_id!r}"
            )
    for pid in times:
        if pid not in path_ids:
            raise SchemaError(
                f"{bundle.gt_path}: ground truth references unknown path {pid!r}"
            )

    snapshot = build_snapshot(segments, paths, od_pairs)
    gt = GroundTruth(travel_times=times, weights=weights)
    return snapshot, bundle.params, gt


def discover_bundles(network_dir: FsPath, config_path: FsPath | None = None,
                     hour: str | None = None) -> list[ScenarioBundle]:
    """Find the bundles a scenario directory defines.

    Per-hour files live in ``hours/<label>/``; a directory carrying od.csv
    at the top level is treated as a single unlabeled hour. ``hour``
    filters to one label.
    """
    network_dir = FsPath(network_dir)
    segments_path = network_dir / SEGMENTS_FILE
    paths_path = network_dir / PATHS_FILE
    for p in (segments_path, paths_path):
        if not p.is_file():
            raise SchemaError(f"{p} not found")
    cfg = FsPath(config_path) if config_path else network_dir / CONFIG_FILE
    if not cfg.is_file():
        raise SchemaError(f"{cfg} not found")
    params, options = read_config(cfg)

    def bundle_for(hour_dir: FsPath, label: str) -> ScenarioBundle:
        od_path = hour_dir / OD_FILE
        gt_path = hour_dir / GT_FILE
        for p in (od_path, gt_path):
            if not p.is_file():
                raise SchemaError(f"{p} not found")
        sensors = hour_dir / SENSORS_FILE
        return ScenarioBundle(
            segments_path=segments_path, paths_path=paths_path,
            od_path=od_path, gt_path=gt_path, params=params, options=options,
            hour=label, sensors_path=sensors if sensors.is_file() else None,
        )

    hours_root = network_dir / HOURS_DIR
    if hours_root.is_dir():
        labels = sorted(d.name for d in hours_root.iterdir() if d.is_dir())
        if hour is not None:
            if hour not in labels:
                raise SchemaError(f"hour {hour!r} not found under {hours_root}")
            labels = [hour]
        if not labels:
            raise SchemaError(f"{hours_root} contains no hour directories")
        return [bundle_for(hours_root / label, label) for label in labels]

    if (network_dir / OD_FILE).is_file():
        return [bundle_for(network_dir, hour if hour is not None else "all")]
    raise SchemaError(
        f"{network_dir} has neither {HOURS_DIR}/ nor a top-level {OD_FILE}"
    )


# --- writers ---------------------------------------------------------------
# repr() of a float round-trips exactly and is stable across runs, which
# keeps generated scenarios byte-identical for a fixed seed

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: FsPath, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_segments(path: FsPath, segments: Iterable[Segment]) -> None:
    write_csv(path, SEGMENTS_HEADER,
              ((s.id, s.length_km, s.lanes, s.v_max_kmh, s.v_min_kmh)
               for s in segments))


def write_paths(path: FsPath, paths: Iterable[Path]) -> None:
    write_csv(path, PATHS_HEADER,
              ((p.id, seq, sid)
               for p in paths
               for seq, sid in enumerate(p.segment_ids, start=1)))


def write_od(path: FsPath, od_pairs: Iterable[ODPair]) -> None:
    write_csv(path, OD_HEADER,
              ((od.id, od.path_id, od.subsample_demand_vph) for od in od_pairs))


def write_ground_truth(path: FsPath, times: Mapping[str, float],
                       weights: Mapping[str, float] | None = None) -> None:
    weights = weights or {}
    write_csv(path, GT_HEADER,
              ((pid, tt, weights.get(pid, 1.0)) for pid, tt in times.items()))


def write_sensors(path: FsPath, counts: Mapping[str, float]) -> None:
    write_csv(path, SENSORS_HEADER, sorted(counts.items()))


def write_config(path: FsPath, params: ModelParams,
                 options: EstimateOptions | None = None) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {_fmt(getattr(params, key))}" for key in _PARAM_KEYS]
    if options is not None:
        defaults = EstimateOptions()
        for key, attr in (("tol_x", "tol_x"), ("tol_g", "tol_g"),
                          ("tol_f", "tol_f"),
                          ("max_iterations", "max_iterations"),
                          ("starts", "n_starts")):
            value = getattr(options, attr)
            if value != getattr(defaults, attr) and value is not None:
                lines.append(f"{key} = {_fmt(value)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
