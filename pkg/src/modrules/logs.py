"""In-memory event-log model: ingestion, discretization, frequency tables.

A log is a list of traces, each an ordered list of events; every event maps
variable names to values. Categorical values are strings (missing entries
become the explicit MISSING token), numerical values are floats (missing
entries are simply absent from the event).
"""
from __future__ import annotations

import csv
import io
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import datetime
from xml.etree import ElementTree

#: Token standing in for a missing categorical value.
MISSING = "⊥"

DEFAULT_BINS = 50


class LogError(ValueError):
    """Raised on malformed input logs or invalid construction arguments."""


@dataclass(frozen=True)
class Histogram:
    """Variable-width bins with per-bin counts and representatives.

    Bin ``i`` covers ``(boundaries[i-1], boundaries[i]]`` with open ends at
    the extremes, so a value sitting exactly on a cut point falls into the
    lower bin and every real number has a bin.
    """

    boundaries: tuple[float, ...]
    counts: tuple[int, ...]
    representatives: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != len(self.boundaries) + 1:
            raise LogError("histogram needs exactly one more bin than boundaries")
        if any(b >= c for b, c in zip(self.boundaries, self.boundaries[1:])):
            raise LogError("histogram boundaries must be strictly ascending")
        if any(c <= 0 for c in self.counts):
            raise LogError("histogram bins must be non-empty")

    @property
    def bin_count(self) -> int:
        return len(self.counts)

    def index(self, x: float) -> int:
        """Bin index of ``x``; total over all reals by clamping at the ends."""
        return bisect_left(self.boundaries, x)

    def representative(self, index: int) -> float:
        return self.representatives[index]

    def bin_range(self, index: int) -> tuple[float, float]:
        """Half-open range ``(lo, hi]`` of a bin, with infinities at the ends."""
        lo = self.boundaries[index - 1] if index > 0 else -math.inf
        hi = self.boundaries[index] if index < len(self.boundaries) else math.inf
        return lo, hi

    def overlapping(self, lo: float, hi: float) -> tuple[int, ...]:
        """Indices of all bins whose range intersects the closed interval [lo, hi]."""
        if lo > hi:
            lo, hi = hi, lo
        hits = []
        for i in range(self.bin_count):
            blo, bhi = self.bin_range(i)
            if hi > blo and lo <= bhi:
                hits.append(i)
        return tuple(hits)


def build_histogram(values: list[float], bins: int = DEFAULT_BINS) -> Histogram:
    """Percentile-based histogram: cut points at nearest-rank quantiles
    i/bins, duplicates collapsed, empty bins merged away; each bin's
    representative is the mean of the training values it holds."""
    if not values:
        raise LogError("cannot build a histogram from no values")
    if bins < 1:
        raise LogError("bins must be >= 1")
    ordered = sorted(values)
    n = len(ordered)
    cuts = sorted({ordered[max(0, math.ceil(i * n / bins) - 1)] for i in range(1, bins)})
    while True:
        counts = [0] * (len(cuts) + 1)
        sums = [0.0] * (len(cuts) + 1)
        for x in ordered:
            i = bisect_left(cuts, x)
            counts[i] += 1
            sums[i] += x
        try:
            empty = counts.index(0)
        except ValueError:
            break
        # merge the empty bin into its left neighbour by dropping a boundary
        del cuts[max(0, empty - 1)]
    reps = tuple(s / c for s, c in zip(sums, counts))
    return Histogram(tuple(cuts), tuple(counts), reps)


def discretize(x: float, histogram: Histogram) -> int:
    """Bin index of ``x`` under the closed-right convention; never fails."""
    return histogram.index(x)


@dataclass(frozen=True)
class VariableSchema:
    """One variable: its kind and either its category list or its histogram."""

    name: str
    kind: str  # "categorical" | "numerical"
    categories: tuple[str, ...] = ()
    histogram: Histogram | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("categorical", "numerical"):
            raise LogError(f"unknown variable kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise LogError(f"categorical variable {self.name!r} has an empty domain")
            if len(set(self.categories)) != len(self.categories):
                raise LogError(f"duplicate categories for variable {self.name!r}")
        elif self.histogram is None:
            raise LogError(f"numerical variable {self.name!r} has no histogram")

    @property
    def is_numerical(self) -> bool:
        return self.kind == "numerical"

    def domain_values(self) -> tuple:
        """Encodable values: category tokens, or bin indices for numericals."""
        if self.is_numerical:
            return tuple(range(self.histogram.bin_count))
        return self.categories


@dataclass(frozen=True)
class Event:
    values: dict[str, object] = field(default_factory=dict)

    def get(self, variable: str):
        return self.values.get(variable)


@dataclass(frozen=True)
class Trace:
    id: str
    events: tuple[Event, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise LogError(f"trace {self.id!r} has no events")


@dataclass(frozen=True)
class EventLog:
    schema: tuple[VariableSchema, ...]
    traces: tuple[Trace, ...]

    @property
    def trace_count(self) -> int:
        return len(self.traces)

    @property
    def event_count(self) -> int:
        return sum(len(t.events) for t in self.traces)

    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.schema)

    def schema_by_name(self) -> dict[str, VariableSchema]:
        return {v.name: v for v in self.schema}

    def event_pairs(self):
        """Yield (trace, previous event or None, event) in log order."""
        for trace in self.traces:
            prev = None
            for event in trace.events:
                yield trace, prev, event
                prev = event

    def discretized(self) -> "EventLog":
        """Same log with numerical values replaced by their bin representative.

        The schema (and its histograms) is kept as is, so re-encoding the
        result assigns every value to the same bin.
        """
        by_name = self.schema_by_name()
        traces = []
        for trace in self.traces:
            events = []
            for event in trace.events:
                values = {}
                for name, value in event.values.items():
                    var = by_name[name]
                    if var.is_numerical:
                        h = var.histogram
                        values[name] = h.representative(h.index(float(value)))
                    else:
                        values[name] = value
                events.append(Event(values))
            traces.append(Trace(trace.id, tuple(events)))
        return EventLog(self.schema, tuple(traces))


@dataclass(frozen=True)
class LogSkeleton:
    """Trace structure without values: ids plus per-event present variables."""

    schema: tuple[VariableSchema, ...]
    traces: tuple[tuple[str, tuple[frozenset[str], ...]], ...]


def skeleton_of(log: EventLog) -> LogSkeleton:
    traces = tuple(
        (t.id, tuple(frozenset(e.values) for e in t.events)) for t in log.traces
    )
    return LogSkeleton(log.schema, traces)


@dataclass(frozen=True)
class FrequencyTable:
    """Per-variable counts of observed values (bin indices for numericals)."""

    counts: dict[str, dict]
    totals: dict[str, int]

    def of(self, variable: str) -> dict:
        return self.counts[variable]

    def total(self, variable: str) -> int:
        return self.totals[variable]


def frequencies(log: EventLog) -> FrequencyTable:
    """Count every non-missing observation, numericals at bin granularity."""
    by_name = log.schema_by_name()
    counts: dict[str, dict] = {v.name: {} for v in log.schema}
    for _, _, event in log.event_pairs():
        for name, value in event.values.items():
            var = by_name[name]
            key = var.histogram.index(float(value)) if var.is_numerical else value
            table = counts[name]
            table[key] = table.get(key, 0) + 1
    totals = {name: sum(table.values()) for name, table in counts.items()}
    return FrequencyTable(counts, totals)


def _build_schema(
    rows: list[tuple[str, dict[str, object]]],
    names: list[str],
    kinds: dict[str, str],
    bins: int,
) -> tuple[VariableSchema, ...]:
    schema = []
    for name in names:
        observed = [values[name] for _, values in rows if name in values]
        if kinds[name] == "numerical":
            numeric = [float(v) for v in observed if v is not None]
            if not numeric:
                raise LogError(f"numerical variable {name!r} has no observed values")
            schema.append(
                VariableSchema(name, "numerical", histogram=build_histogram(numeric, bins))
            )
        else:
            domain = sorted({str(v) for v in observed})
            schema.append(VariableSchema(name, "categorical", categories=tuple(domain)))
    return tuple(schema)


def build_log(
    traces: list[tuple[str, list[dict[str, object]]]],
    kinds: dict[str, str],
    bins: int = DEFAULT_BINS,
) -> EventLog:
    """Assemble an EventLog from raw per-event value dicts.

    Categorical missing entries are materialized as the MISSING token;
    numerical missing entries stay absent.
    """
    if not traces:
        raise LogError("log has no traces")
    names = list(kinds)
    flat = []
    out_traces = []
    for trace_id, events in traces:
        evs = []
        for raw in events:
            values: dict[str, object] = {}
            for name in names:
                v = raw.get(name)
                if kinds[name] == "categorical":
                    values[name] = MISSING if v is None else str(v)
                elif v is not None:
                    values[name] = float(v)
            evs.append(Event(values))
            flat.append((trace_id, values))
        out_traces.append(Trace(str(trace_id), tuple(evs)))
    schema = _build_schema(flat, names, kinds, bins)
    return EventLog(schema, tuple(out_traces))


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def parse_schema_sidecar(text: str) -> dict[str, str]:
    """Parse the sidecar JSON {"variables": [{"name":..., "kind":...}]}."""
    doc = json.loads(text)
    kinds = {}
    for entry in doc.get("variables", []):
        kind = entry["kind"]
        if kind not in ("categorical", "numerical"):
            raise LogError(f"unknown kind {kind!r} in schema sidecar")
        kinds[entry["name"]] = kind
    return kinds


def parse_csv(
    text: str,
    declared_kinds: dict[str, str] | None = None,
    bins: int = DEFAULT_BINS,
) -> EventLog:
    """Parse the CSV log format: header ``trace_id,event_index,<var>,...``.

    Variable kinds come from ``declared_kinds`` where given; otherwise a
    column whose non-empty cells all parse as numbers is numerical. Events
    are grouped by trace_id and ordered by event_index.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LogError("empty input") from None
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "trace_id" or header[1] != "event_index":
        raise LogError("header must start with trace_id,event_index and name one variable")
    names = header[2:]
    if len(set(names)) != len(names):
        raise LogError("duplicate variable columns")

    rows: list[tuple[str, int, list[str]]] = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise LogError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        trace_id = row[0].strip()
        try:
            index = int(row[1])
        except ValueError:
            raise LogError(f"line {lineno}: bad event_index {row[1]!r}") from None
        if (trace_id, index) in seen:
            raise LogError(f"duplicate event ({trace_id!r}, {index})")
        seen.add((trace_id, index))
        rows.append((trace_id, index, [c.strip() for c in row[2:]]))
    if not rows:
        raise LogError("no data rows")

    kinds: dict[str, str] = {}
    for col, name in enumerate(names):
        if declared_kinds and name in declared_kinds:
            kinds[name] = declared_kinds[name]
            continue
        cells = [r[2][col] for r in rows if r[2][col] != ""]
        kinds[name] = "numerical" if cells and all(_looks_numeric(c) for c in cells) else "categorical"

    grouped: dict[str, list[tuple[int, dict[str, object]]]] = {}
    order: list[str] = []
    for trace_id, index, cells in rows:
        values: dict[str, object] = {}
        for name, cell in zip(names, cells):
            if cell == "":
                continue
            if kinds[name] == "numerical":
                if not _looks_numeric(cell):
                    raise LogError(f"bad cell {cell!r} in numeric column {name!r}")
                values[name] = float(cell)
            else:
                values[name] = cell
        if trace_id not in grouped:
            grouped[trace_id] = []
            order.append(trace_id)
        grouped[trace_id].append((index, values))

    traces = []
    for trace_id in order:
        events = [values for _, values in sorted(grouped[trace_id], key=lambda p: p[0])]
        traces.append((trace_id, events))
    return build_log(traces, kinds, bins)


def serialize_csv(log: EventLog) -> str:
    """Inverse of parse_csv; missing values become empty cells."""
    names = log.variable_names()
    by_name = log.schema_by_name()
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["trace_id", "event_index"] + list(names))
    for trace in log.traces:
        for i, event in enumerate(trace.events):
            cells = [trace.id, str(i)]
            for name in names:
                v = event.values.get(name)
                if v is None or (not by_name[name].is_numerical and v == MISSING):
                    cells.append("")
                elif by_name[name].is_numerical:
                    cells.append(repr(float(v)))
                else:
                    cells.append(str(v))
            writer.writerow(cells)
    return out.getvalue()


def _local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_xes_timestamp(text: str) -> float:
    cleaned = text.strip().replace("Z", "+00:00")
    try:
        return datetime.fromisoformat(cleaned).timestamp()
    except ValueError:
        raise LogError(f"unparseable date {text!r}") from None


def import_xes(text: str, bins: int = DEFAULT_BINS) -> EventLog:
    """Import a minimal XES subset: string/int/float/boolean/date attributes,
    with the event's concept:name exposed as the ``activity`` variable and
    dates converted to epoch seconds."""
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise LogError(f"malformed XML: {exc}") from None

    kinds: dict[str, str] = {}
    traces: list[tuple[str, list[dict[str, object]]]] = []
    for element in root.iter():
        if _local_name(element.tag) != "trace":
            continue
        trace_id = f"t{len(traces)}"
        events: list[dict[str, object]] = []
        for child in element:
            tag = _local_name(child.tag)
            if tag != "event":
                if tag == "string" and child.get("key") == "concept:name":
                    trace_id = child.get("value", trace_id)
                continue
            values: dict[str, object] = {}
            for attr in child:
                kind = _local_name(attr.tag)
                key = attr.get("key")
                raw = attr.get("value")
                if key is None or raw is None:
                    continue
                if key == "concept:name":
                    key = "activity"
                if kind in ("int", "float"):
                    values[key] = float(raw)
                    kinds.setdefault(key, "numerical")
                elif kind == "date":
                    values[key] = _parse_xes_timestamp(raw)
                    kinds.setdefault(key, "numerical")
                elif kind in ("string", "boolean", "id"):
                    values[key] = raw
                    kinds.setdefault(key, "categorical")
            events.append(values)
        if events:
            traces.append((trace_id, events))
    if not traces:
        raise LogError("no traces")
    return build_log(traces, kinds, bins)
