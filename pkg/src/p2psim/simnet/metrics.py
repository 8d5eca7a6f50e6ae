"""Summaries computed from a finished trace."""

from __future__ import annotations

import csv
import io
from collections import Counter
from statistics import mean
from typing import Optional

from .trace import SimTrace

GNUTELLA_KINDS = ("Ping", "Pong", "Query", "QueryHit", "Push")


def _queries(trace: SimTrace, since: Optional[int], until: Optional[int]):
    return [
        q for q in trace.queries.values()
        if (since is None or q.issued_at >= since) and (until is None or q.issued_at < until)
    ]


def success_ratio(trace: SimTrace, since: Optional[int] = None, until: Optional[int] = None, answerable: bool = False) -> float:
    """Fraction of queries (issued in ``[since, until)``) with at least one hit.

    With ``answerable`` only queries whose file was held by some other live
    node at issue time count; this is lookup completeness.
    """
    qs = _queries(trace, since, until)
    if answerable:
        qs = [q for q in qs if set(q.holders) - {q.origin}]
    if not qs:
        return 0.0
    return sum(q.success for q in qs) / len(qs)


def metrics(trace: SimTrace, since: Optional[int] = None, until: Optional[int] = None) -> dict:
    kinds = Counter(r.kind for r in trace.records)
    total = len(trace.records)
    report: dict = {"messages_total": total}
    for k in sorted(kinds):
        report[f"count_{k}"] = kinds[k]
        report[f"fraction_{k}"] = kinds[k] / total if total else 0.0
    report["pong_fraction"] = kinds.get("Pong", 0) / total if total else 0.0
    report["ping_pong_total"] = kinds.get("Ping", 0) + kinds.get("Pong", 0)
    report["pings_beyond_one_hop"] = sum(1 for r in trace.records if r.kind == "Ping" and r.hops)
    report["bytes_total"] = sum(r.size for r in trace.records)

    qs = _queries(trace, since, until)
    report["queries"] = len(qs)
    report["queries_successful"] = sum(q.success for q in qs)
    report["success_ratio"] = success_ratio(trace, since, until)
    report["completeness"] = success_ratio(trace, since, until, answerable=True)
    latencies = [q.first_hit_at - q.issued_at for q in qs if q.success]
    report["mean_reply_latency_ms"] = mean(latencies) if latencies else 0.0
    report["mean_nodes_reached"] = mean(q.reached for q in qs) if qs else 0.0
    report["max_nodes_reached"] = max((q.reached for q in qs), default=0)

    report["orphans_reassigned"] = trace.orphans["reassigned"]
    report["orphans_unattached"] = trace.orphans["unattached"]
    drops = Counter(d.reason for d in trace.drops)
    for reason in sorted(drops):
        report[f"drops_{reason}"] = drops[reason]
    report["drops_duplicate"] = trace.counters.get("drop:duplicate", 0)
    report["lost"] = len(trace.lost)
    report["transfers"] = len(trace.transfers)
    report["index_snapshots"] = len(trace.snapshots)
    return report


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k, v in report.items():
        w.writerow([k, _fmt(v)])
    return buf.getvalue()


def to_table(report: dict, title: str = "") -> str:
    width = max((len(k) for k in report), default=0)
    lines = [title, "=" * max(len(title), 1)] if title else []
    lines += [f"{k.ljust(width)}  {_fmt(v)}" for k, v in report.items()]
    return "\n".join(lines) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def rows_to_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[_fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    out.append("  ".join("-" * w for w in widths))
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out) + "\n"
