"""Long-term ranking stability of query suggestions.

Compares each snapshot of a term's suggestion ranking against the first
and the previous snapshot using rank-biased overlap (RBO), then
aggregates the per-term series into windowed mean/std curves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from statistics import fmean

from .errors import ConfigError, DuplicateItemError, TooShortError, ValidationError

DEFAULT_PERSISTENCE = 0.90
VARIANTS = ("min", "ext")


@dataclass(frozen=True)
class RboConfig:
    """Persistence parameter p in (0,1) and estimate variant.

    Small p concentrates weight on the top ranks; p -> 1 weighs all
    depths equally. "ext" extrapolates the agreement beyond the observed
    depth, "min" truncates the series there (a lower bound).
    """

    p: float = DEFAULT_PERSISTENCE
    variant: str = "ext"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"persistence parameter must be in (0,1), got {self.p}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown RBO variant {self.variant!r}, expected one of {VARIANTS}")


@dataclass(frozen=True)
class StabilityPoint:
    timestamp: datetime
    rbo_vs_first: float
    rbo_vs_prev: float


@dataclass
class RankingSeries:
    """Time-ordered rankings of one entity on one engine."""

    entity_id: str
    engine: str
    snapshots: list  # list of (datetime, list[str]) with strictly increasing times


@dataclass(frozen=True)
class AggregatedPoint:
    window_start: datetime
    mean_vs_first: float
    std_vs_first: float
    mean_vs_prev: float
    std_vs_prev: float
    n: int


def _check_unique(ranking) -> None:
    if len(set(ranking)) != len(ranking):
        raise DuplicateItemError("ranking contains duplicate items")


def _overlap_series(shorter, longer):
    """X_d = |prefix_d(longer) ∩ prefix_min(d,s)(shorter)| for d = 1..len(longer).

    Incremental set walk; each shared element is counted once, at the
    deeper of its two ranks.
    """
    s = len(shorter)
    seen_long, seen_short = set(), set()
    xs = []
    x = 0
    for d, item_l in enumerate(longer, start=1):
        seen_long.add(item_l)
        if d <= s:
            item_s = shorter[d - 1]
            seen_short.add(item_s)
            if item_l == item_s:
                x += 1
            else:
                if item_l in seen_short:
                    x += 1
                if item_s in seen_long:
                    x += 1
        else:
            if item_l in seen_short:
                x += 1
        xs.append(x)
    return xs


def rbo(a, b, config: RboConfig = RboConfig()) -> float:
    """Rank-biased overlap of two rankings with unique items.

    Agreement at depth d is A_d = X_d / d where X_d is the size of the
    intersection of the two depth-d prefixes (the shorter list's prefix
    saturates at its full length). The min variant returns
    (1-p) * sum_{d=1..D} p^(d-1) * A_d over the observed depths
    D = max(len(a), len(b)), treating unseen depths as zero agreement.
    The ext variant additionally extrapolates: the shorter list is
    assumed to keep agreeing at its final rate X_s/s through the longer
    list's depth, and the tail beyond depth D continues at the last
    extended agreement, giving

        ext = (1-p)/p * ( sum_{d=1..l} X_d/d p^d
                        + sum_{d=s+1..l} X_s (d-s)/(s d) p^d )
              + ((X_l - X_s)/l + X_s/s) p^l.

    Symmetric in (a, b); result clamped to [0, 1]. Two empty rankings
    compare as identical (1.0); one empty ranking yields 0.0.
    """
    _check_unique(a)
    _check_unique(b)
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    s, l = len(shorter), len(longer)
    if l == 0:
        return 1.0
    if s == 0:
        return 0.0

    p = config.p
    xs = _overlap_series(shorter, longer)
    sum_observed = sum(p ** d * xs[d - 1] / d for d in range(1, l + 1))

    if config.variant == "min":
        value = (1.0 - p) / p * sum_observed
    else:
        x_s, x_l = xs[s - 1], xs[l - 1]
        sum_extended = sum(
            p ** d * x_s * (d - s) / (s * d) for d in range(s + 1, l + 1)
        )
        tail = ((x_l - x_s) / l + x_s / s) * p ** l
        value = (1.0 - p) / p * (sum_observed + sum_extended) + tail
    return min(1.0, max(0.0, value))


def rbo_prefix_weight(p: float, d: int) -> float:
    """Total weight mass RBO assigns to ranks 1..d.

    W(1:d) = 1 - p^(d-1) + ((1-p)/p) * d * (ln(1/(1-p)) - sum_{i=1..d-1} p^i/i)
    Strictly increasing in d with limit 1.
    """
    if not 0.0 < p < 1.0:
        raise ConfigError(f"persistence parameter must be in (0,1), got {p}")
    if d < 1:
        raise ConfigError(f"depth must be >= 1, got {d}")
    partial = sum(p ** i / i for i in range(1, d))
    return 1.0 - p ** (d - 1) + (1.0 - p) / p * d * (math.log(1.0 / (1.0 - p)) - partial)


def stability_series(series: RankingSeries, config: RboConfig = RboConfig()):
    """Per-snapshot RBO vs the first and vs the previous ranking.

    The first snapshot is emitted as (1.0, 1.0) by convention so all
    series align on the snapshot axis.
    """
    snaps = series.snapshots
    if len(snaps) < 2:
        raise TooShortError(
            f"entity {series.entity_id!r} has {len(snaps)} snapshot(s); need at least 2"
        )
    for (t_prev, _), (t_next, _) in zip(snaps, snaps[1:]):
        if t_next <= t_prev:
            raise ValidationError(
                f"snapshots for entity {series.entity_id!r} are not strictly increasing"
            )

    first_ts, first_ranking = snaps[0]
    points = [StabilityPoint(first_ts, 1.0, 1.0)]
    for idx in range(1, len(snaps)):
        ts, ranking = snaps[idx]
        _, prev_ranking = snaps[idx - 1]
        points.append(
            StabilityPoint(
                ts,
                rbo(ranking, first_ranking, config),
                rbo(ranking, prev_ranking, config),
            )
        )
    return points


def _pstd(values, mean):
    return math.sqrt(fmean((v - mean) ** 2 for v in values)) if values else 0.0


def aggregate_window(points, window: timedelta = timedelta(days=3)):
    """Bucket stability points into half-open windows and average them.

    Windows are aligned to the earliest timestamp across all points.
    Returns one AggregatedPoint per non-empty bucket with the mean and
    population standard deviation of both statistics.
    """
    if window <= timedelta(0):
        raise ConfigError("aggregation window must be positive")
    points = list(points)
    if not points:
        return []
    origin = min(pt.timestamp for pt in points)
    buckets: dict[int, list[StabilityPoint]] = {}
    for pt in points:
        idx = int((pt.timestamp - origin) / window)
        buckets.setdefault(idx, []).append(pt)

    rows = []
    for idx in sorted(buckets):
        bucket = buckets[idx]
        vf = [pt.rbo_vs_first for pt in bucket]
        vp = [pt.rbo_vs_prev for pt in bucket]
        mean_f, mean_p = fmean(vf), fmean(vp)
        rows.append(
            AggregatedPoint(
                window_start=origin + idx * window,
                mean_vs_first=mean_f,
                std_vs_first=_pstd(vf, mean_f),
                mean_vs_prev=mean_p,
                std_vs_prev=_pstd(vp, mean_p),
                n=len(bucket),
            )
        )
    return rows


def build_ranking_series(records, engine: str | None = None):
    """Group suggestion records into per-(entity, engine) ranking series.

    Each session becomes one ranking (suggestions in position order).
    Duplicate strings within a session (possible after prefix stripping)
    are dropped keeping the first occurrence, since RBO requires unique
    items. Entities are returned sorted by (entity, engine).
    """
    sessions: dict[tuple, dict] = {}
    for rec in records:
        if engine is not None and rec.engine != engine:
            continue
        key = (rec.query_term, rec.engine, rec.session_id)
        slot = sessions.setdefault(key, {"timestamp": rec.timestamp, "items": []})
        slot["items"].append((rec.position, rec.suggestion))

    grouped: dict[tuple, list] = {}
    for (term, eng, _session), slot in sorted(
        sessions.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[1]["timestamp"], kv[0][2])
    ):
        ranking, seen = [], set()
        for _pos, text in sorted(slot["items"]):
            if text not in seen:
                seen.add(text)
                ranking.append(text)
        grouped.setdefault((term, eng), []).append((slot["timestamp"], ranking))

    return [
        RankingSeries(entity_id=term, engine=eng, snapshots=snaps)
        for (term, eng), snaps in sorted(grouped.items())
    ]


STABILITY_COLUMNS = [
    "window_start",
    "mean_vs_first",
    "std_vs_first",
    "mean_vs_prev",
    "std_vs_prev",
    "n",
]


def write_stability_csv(path, rows, header_lines=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(STABILITY_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.window_start.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    f"{row.mean_vs_first:.6f}",
                    f"{row.std_vs_first:.6f}",
                    f"{row.mean_vs_prev:.6f}",
                    f"{row.std_vs_prev:.6f}",
                    row.n,
                ]
            )
