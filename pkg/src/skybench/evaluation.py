"""Pairwise relative-pose accuracy metrics, PSNR, and report formatting.

Metrics are computed over unordered frame pairs: for each pair the
relative pose is formed in the predicted and reference sets and the
rotation / translation-direction errors between the two are thresholded.
Because everything is relative, the numbers are invariant to a global
rigid transform of the predicted poses (and to uniform positive scaling
of translations, since only directions enter).

Scores are bucketed by view modality. The default rule credits a pair
to the bucket of each distinct endpoint modality; the alternative
"image" rule credits each endpoint separately, so a same-modality pair
counts twice in its bucket. The rule in force is recorded in reports.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import InputError, InvalidPairing, InvalidShape
from .geometry import (
    Pose,
    relative_pose,
    rotation_error_deg,
    translation_direction_error_deg,
)

BUCKETS = ("ground", "aerial", "satellite")
BUCKET_RULES = ("pair", "image")


@dataclass(frozen=True)
class PairError:
    """Relative-pose error for one unordered frame pair."""

    i: int
    j: int
    rot_err_deg: float
    trans_err_deg: float
    modalities: tuple[str, str]

    def __post_init__(self):
        if not self.i < self.j:
            raise InputError("pair indices must satisfy i < j")
        for err in (self.rot_err_deg, self.trans_err_deg):
            if not 0.0 <= err <= 180.0:
                raise InputError(f"pair error {err} outside [0, 180] degrees")


@dataclass(frozen=True)
class EvalConfig:
    rot_threshold_deg: float = 5.0
    trans_threshold_deg: float = 5.0
    bucket_rule: str = "pair"

    def __post_init__(self):
        if self.rot_threshold_deg <= 0.0 or self.trans_threshold_deg <= 0.0:
            raise InputError("thresholds must be positive")
        if self.bucket_rule not in BUCKET_RULES:
            raise InputError(f"bucket_rule must be one of {BUCKET_RULES}")


@dataclass(frozen=True)
class BucketMetrics:
    """Accuracy percentages for one modality bucket."""

    rra: float
    rta: float
    pairs: int  # bucket contributions under the rule in force

    def __post_init__(self):
        for pct in (self.rra, self.rta):
            if not 0.0 <= pct <= 100.0:
                raise InputError(f"percentage {pct} outside [0, 100]")
        if self.pairs < 1:
            raise InputError("a reported bucket needs at least one pair")


@dataclass(frozen=True)
class MetricReport:
    """Per-modality accuracy plus overall averages.

    Buckets with no contributing pairs are listed in `missing` and
    excluded from the averages rather than scored as zero.
    """

    buckets: dict[str, BucketMetrics]
    missing: tuple[str, ...]
    rra_avg: float
    rta_avg: float
    rot_threshold_deg: float = 5.0
    trans_threshold_deg: float = 5.0
    bucket_rule: str = "pair"

    def __post_init__(self):
        names = set(self.buckets) | set(self.missing)
        if names != set(BUCKETS) or set(self.buckets) & set(self.missing):
            raise InputError("buckets and missing must partition the modalities")
        if not self.buckets:
            raise InputError("a report needs at least one scored bucket")
        for want, got in (
            (statistics.fmean(b.rra for b in self.buckets.values()), self.rra_avg),
            (statistics.fmean(b.rta for b in self.buckets.values()), self.rta_avg),
        ):
            if abs(want - got) > 1e-9:
                raise InputError("overall averages inconsistent with buckets")

    @property
    def avg(self) -> float:
        return (self.rra_avg + self.rta_avg) / 2.0


def pair_errors(pred, gt, tags) -> list[PairError]:
    """Relative-pose errors over every unordered pair of frames."""
    pred = list(pred)
    gt = list(gt)
    tags = list(tags)
    if not len(pred) == len(gt) == len(tags):
        raise InvalidPairing("pose lists and tags must have equal length")
    if len(pred) < 2:
        raise InvalidPairing("need at least two frames to form a pair")
    for tag in tags:
        if tag not in BUCKETS:
            raise InputError(f"unknown modality {tag!r}")
    out = []
    for i in range(len(pred)):
        for j in range(i + 1, len(pred)):
            rel_p = relative_pose(pred[i], pred[j])
            rel_g = relative_pose(gt[i], gt[j])
            out.append(
                PairError(
                    i,
                    j,
                    rotation_error_deg(rel_p.rotation, rel_g.rotation),
                    translation_direction_error_deg(
                        rel_p.translation, rel_g.translation
                    ),
                    (tags[i], tags[j]),
                )
            )
    return out


def _bucket_tags(err: PairError, rule: str):
    if rule == "pair":
        a, b = err.modalities
        return (a,) if a == b else (a, b)
    return err.modalities  # "image": one credit per endpoint


def rra_rta(errors, config: EvalConfig = EvalConfig()) -> MetricReport:
    """Threshold pair errors into per-modality accuracy percentages."""
    errors = list(errors)
    if not errors:
        raise InputError("cannot score an empty error list")
    hits_r: dict[str, int] = {b: 0 for b in BUCKETS}
    hits_t: dict[str, int] = {b: 0 for b in BUCKETS}
    totals: dict[str, int] = {b: 0 for b in BUCKETS}
    for err in errors:
        rot_ok = err.rot_err_deg < config.rot_threshold_deg
        trans_ok = err.trans_err_deg < config.trans_threshold_deg
        for tag in _bucket_tags(err, config.bucket_rule):
            totals[tag] += 1
            hits_r[tag] += rot_ok
            hits_t[tag] += trans_ok
    buckets = {
        b: BucketMetrics(
            100.0 * hits_r[b] / totals[b], 100.0 * hits_t[b] / totals[b], totals[b]
        )
        for b in BUCKETS
        if totals[b]
    }
    missing = tuple(b for b in BUCKETS if not totals[b])
    return MetricReport(
        buckets=buckets,
        missing=missing,
        rra_avg=statistics.fmean(b.rra for b in buckets.values()),
        rta_avg=statistics.fmean(b.rta for b in buckets.values()),
        rot_threshold_deg=config.rot_threshold_deg,
        trans_threshold_deg=config.trans_threshold_deg,
        bucket_rule=config.bucket_rule,
    )


def evaluate_poses(pred, gt, tags, config: EvalConfig = EvalConfig()) -> MetricReport:
    return rra_rta(pair_errors(pred, gt, tags), config)


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give inf."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidShape(f"raster shapes {x.shape} and {y.shape} differ")
    if peak <= 0.0 or not math.isfinite(peak):
        raise InputError("peak must be positive and finite")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _cell(value) -> str:
    if value is None:
        return "-"
    return str(Decimal(repr(float(value))).quantize(Decimal("0.1"), ROUND_HALF_UP))


def _threshold_label(kind: str, deg: float) -> str:
    d = Decimal(repr(float(deg))).normalize()
    return f"{kind}@{d}"


def format_report(report: MetricReport, style: str = "full") -> str:
    """Render a report as a text table.

    "full" lists Ground | Satellite | Aerial | Avg with rotation and
    translation sub-columns; "ground_satellite" lists Ground | Satellite
    | Overall Avg. Values use one decimal place, half-up. Buckets with
    no pairs render as "-" with a footnote.
    """
    if style == "full":
        columns = ["ground", "satellite", "aerial", "avg"]
    elif style == "ground_satellite":
        columns = ["ground", "satellite", "overall avg"]
    else:
        raise InputError(f"unknown report style {style!r}")

    rra_label = _threshold_label("RRA", report.rot_threshold_deg)
    rta_label = _threshold_label("RTA", report.trans_threshold_deg)

    header1, header2, data = [], [], []
    for col in columns:
        if col == "avg":
            header1.append("Avg")
            header2.extend([rra_label, rta_label])
            data.extend([_cell(report.rra_avg), _cell(report.rta_avg)])
        elif col == "overall avg":
            header1.append("Overall Avg")
            header2.append("avg")
            data.append(_cell(report.avg))
        else:
            header1.append(col.capitalize())
            header2.extend([rra_label, rta_label])
            bucket = report.buckets.get(col)
            if bucket is None:
                data.extend(["-", "-"])
            else:
                data.extend([_cell(bucket.rra), _cell(bucket.rta)])

    spans = [1 if c == "overall avg" else 2 for c in columns]
    cell_w = 8
    top = " | ".join(
        name.ljust(cell_w * span + 2 * (span - 1))
        for name, span in zip(header1, spans)
    )
    sub_groups, data_groups, k = [], [], 0
    for span in spans:
        sub_groups.append("  ".join(s.ljust(cell_w) for s in header2[k : k + span]))
        data_groups.append("  ".join(s.ljust(cell_w) for s in data[k : k + span]))
        k += span
    lines = [top, " | ".join(sub_groups), " | ".join(data_groups)]
    if style == "full":
        lines.append(f"avg: {_cell(report.avg)}")
    for name in report.missing:
        if name in columns:
            lines.append(f"note: no {name} pairs in the input")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Recover the numbers from a format_report table.

    Returns {column label: {"rra": value-or-None, "rta": ...}} plus
    "combined" for the trailing avg line when present. Inverse of
    format_report up to the printed precision.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise InputError("not a report table")
    names = [c.strip().lower() for c in lines[0].split("|")]
    subs = [c.split() for c in lines[1].split("|")]
    cells = [c.split() for c in lines[2].split("|")]
    if not len(names) == len(subs) == len(cells):
        raise InputError("malformed report table")
    out: dict = {}
    for name, labels, values in zip(names, subs, cells):
        if len(labels) != len(values):
            raise InputError(f"column {name!r} is malformed")
        entry = {}
        for label, value in zip(labels, values):
            key = label.split("@")[0].lower()
            entry[key] = None if value == "-" else float(value)
        out[name] = entry
    for line in lines[3:]:
        if line.startswith("avg:"):
            out["combined"] = float(line.split(":", 1)[1])
    return out


def report_to_json(report: MetricReport) -> dict:
    """JSON-serializable view of a report, averages included."""
    return {
        "buckets": {
            name: {"rra": b.rra, "rta": b.rta, "pairs": b.pairs}
            for name, b in sorted(report.buckets.items())
        },
        "missing": list(report.missing),
        "rra_avg": report.rra_avg,
        "rta_avg": report.rta_avg,
        "avg": report.avg,
        "rot_threshold_deg": report.rot_threshold_deg,
        "trans_threshold_deg": report.trans_threshold_deg,
        "bucket_rule": report.bucket_rule,
    }


def aggregate_reports(reports) -> dict:
    """Mean and sample standard deviation across site reports.

    All reports must share thresholds and bucket rule; only buckets
    scored in every report are aggregated.
    """
    reports = list(reports)
    if not reports:
        raise InputError("nothing to aggregate")
    first = reports[0]
    for r in reports[1:]:
        if (
            r.rot_threshold_deg != first.rot_threshold_deg
            or r.trans_threshold_deg != first.trans_threshold_deg
            or r.bucket_rule != first.bucket_rule
        ):
            raise InputError("cannot aggregate reports with different settings")

    def stat(values):
        values = list(values)
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        return {"mean": mean, "std": std}

    common = set(BUCKETS)
    for r in reports:
        common &= set(r.buckets)
    return {
        "sites": len(reports),
        "buckets": {
            name: {
                "rra": stat(r.buckets[name].rra for r in reports),
                "rta": stat(r.buckets[name].rta for r in reports),
            }
            for name in sorted(common)
        },
        "rra_avg": stat(r.rra_avg for r in reports),
        "rta_avg": stat(r.rta_avg for r in reports),
        "avg": stat(r.avg for r in reports),
    }
