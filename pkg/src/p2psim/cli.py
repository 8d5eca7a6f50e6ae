"""Command-line front end.

Exit codes: 0 clean, 1 invariant violations, 2 usage or scenario error.
"""

from __future__ import annotations

import argparse
import binascii
import copy
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import wire_gnutella as gw
from . import wire_napster as nw
from . import wire_openft as ow
from .errors import WireError
from .simnet.config import FailureSpec, ScenarioError, ScenarioSpec, load_spec
from .simnet.metrics import rows_to_csv, rows_to_table, success_ratio, to_csv, to_table
from .simnet.scenario import RunResult, run_spec

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
FAILURE_GRACE_MS = 500


class UsageError(Exception):
    pass


def _seed(spec: ScenarioSpec) -> int:
    env = os.environ.get("SEED")
    if env is None or env == "":
        return spec.seed
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SEED must be an integer, got {env!r}") from None


def _violation_lines(result: RunResult, limit: int = 20) -> list[str]:
    vs = result.violations
    lines = [f"violations: {len(vs)}"]
    for v in vs[:limit]:
        lines.append(f"  {v.rule} id={v.descriptor_id} edge={v.edge[0]}->{v.edge[1]} {v.detail}")
    if len(vs) > limit:
        lines.append(f"  ... {len(vs) - limit} more")
    return lines


# --- simulate -------------------------------------------------------------------------


def cmd_simulate(spec_path: str, out_dir: str) -> int:
    spec = load_spec(spec_path)
    seed = _seed(spec)
    result = run_spec(spec, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.write_jsonl(out / "trace.jsonl")
    report = result.report
    (out / "metrics.csv").write_text(to_csv(report))
    text = to_table(report, f"{spec.name} ({spec.protocol.protocol}, seed {seed})")
    text += "\n" + "\n".join(_violation_lines(result)) + "\n"
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_VIOLATION if result.violations else EXIT_OK


# --- compare ---------------------------------------------------------------------------


def failure_variant(spec: ScenarioSpec) -> tuple[ScenarioSpec, int]:
    """The same scenario with the architecture's characteristic failure at mid-run."""
    t_fail = spec.t_end // 2
    proto = spec.protocol.protocol
    if proto == "napster":
        failure = FailureSpec(t_fail, "central")
    elif proto.startswith("superpeer"):
        failure = FailureSpec(t_fail, "super")
    else:
        failure = FailureSpec(t_fail, "random", 0.1)
    variant = copy.deepcopy(spec)
    variant.name = f"{spec.name}-failure"
    variant.workload.failures = [failure]
    return variant, t_fail


def compare_row(spec: ScenarioSpec, seed: int) -> tuple[dict, list]:
    base = run_spec(spec, seed)
    rep = base.report
    variant, t_fail = failure_variant(spec)
    failed = run_spec(variant, seed)
    row = {
        "scenario": spec.name,
        "protocol": spec.protocol.protocol,
        "topology": spec.topology,
        "queries": rep["queries"],
        "completeness": rep["completeness"],
        "success_ratio": rep["success_ratio"],
        "nodes_reached": rep["mean_nodes_reached"],
        "messages": rep["messages_total"],
    }
    for kind in ("Ping", "Pong", "Query", "QueryHit", "Push"):
        row[f"msg_{kind}"] = rep.get(f"count_{kind}", 0)
    row["failure"] = variant.workload.failures[0].target
    row["success_before_failure"] = success_ratio(failed.trace, until=t_fail)
    row["success_after_failure"] = success_ratio(failed.trace, since=t_fail + FAILURE_GRACE_MS)
    row["orphans_unattached"] = failed.trace.orphans["unattached"]
    return row, base.violations + failed.violations


def cmd_compare(spec_paths: Sequence[str], out_dir: str) -> int:
    specs = [load_spec(p) for p in spec_paths]
    if len(specs) < 2:
        raise UsageError("compare needs at least two specs")
    ref = specs[0]
    for s in specs[1:]:
        if s.workload != ref.workload or s.seed != ref.seed:
            raise UsageError(f"spec {s.name!r} does not share workload and seed with {ref.name!r}")
    seed = _seed(ref)
    rows, violations = [], []
    for s in specs:
        row, vs = compare_row(s, seed)
        rows.append(row)
        violations += vs
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text(rows_to_csv(rows))
    table = rows_to_table(rows)
    (out / "compare.txt").write_text(table)
    sys.stdout.write(table)
    if violations:
        sys.stdout.write(f"violations: {len(violations)}\n")
    return EXIT_VIOLATION if violations else EXIT_OK


# --- codec --------------------------------------------------------------------------------


def _unhex(text: str) -> bytes:
    cleaned = "".join(text.split())
    try:
        return binascii.unhexlify(cleaned)
    except (binascii.Error, ValueError) as exc:
        raise UsageError(f"malformed hex: {exc}") from None


def decode_hex(protocol: str, hex_text: str) -> str:
    data = _unhex(hex_text)
    if protocol == "gnutella":
        msgs = [gw.describe(d) for d in gw.decode_stream(data)]
    elif protocol == "napster":
        msgs = [nw.describe(m) for m in nw.decode_stream(data)]
    elif protocol == "openft":
        msgs = [ow.describe(p) for p in ow.decode_stream(data)]
    else:
        raise UsageError(f"unknown protocol {protocol!r}")
    return "\n\n".join(msgs) + "\n"


def _build(cls, data: dict):
    """Instantiate a wire dataclass from JSON, hex-decoding bytes fields."""
    kw = {}
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in types:
            raise UsageError(f"{cls.__name__} has no field {key!r}")
        t = str(types[key])
        if t == "bytes" and isinstance(value, str):
            value = _unhex(value)
        elif t.startswith("tuple") and isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kw[key] = value
    return cls(**kw)


GNUTELLA_PAYLOADS = {
    "ping": gw.PingPayload, "pong": gw.PongPayload, "query": gw.QueryPayload,
    "queryhit": gw.QueryHitPayload, "push": gw.PushPayload,
}


def encode_json(protocol: str, text: str) -> bytes:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("expected a JSON object")
    data = dict(data)
    if protocol == "gnutella":
        kind = str(data.pop("kind", "")).lower()
        if kind not in GNUTELLA_PAYLOADS:
            raise UsageError(f"unknown descriptor kind {kind!r}")
        did = _unhex(data.pop("id", "00" * 16))
        ttl, hops = int(data.pop("ttl", 7)), int(data.pop("hops", 0))
        if kind == "queryhit":
            data["results"] = tuple(_build(gw.QueryHitResult, r) for r in data.get("results", []))
        return gw.encode(gw.Descriptor.build(did, _build(GNUTELLA_PAYLOADS[kind], data), ttl, hops))
    if protocol == "napster":
        fn = data.get("function")
        try:
            code = nw.Function[fn.upper()] if isinstance(fn, str) else int(fn)
        except (KeyError, TypeError, ValueError):
            raise UsageError(f"unknown function {fn!r}") from None
        return nw.encode_message(nw.NapsterMessage(code, tuple(str(f) for f in data.get("fields", []))))
    if protocol == "openft":
        try:
            kind = ow.PacketKind[str(data.get("kind", "")).upper()]
        except KeyError:
            raise UsageError(f"unknown packet kind {data.get('kind')!r}") from None
        flags = int(data.get("flags", 0))
        body = dict(data.get("payload", {}))
        candidates = ow.payload_types(kind)
        cls = candidates[-1] if flags & ow.FLAG_RESPONSE and len(candidates) > 1 else candidates[0]
        if cls is ow.SearchResponse:
            body["hits"] = tuple(_build(ow.SearchHit, h) for h in body.get("hits", []))
        if cls is ow.ShareRecord:
            body["record"] = _build(nw.SharedFileRecord, body.get("record", {}))
        if cls is ow.KeyValues:
            body["items"] = tuple(tuple(i) for i in body.get("items", []))
        if cls is ow.NodeInfo and "category" in body:
            body["category"] = ow.NodeClass(body["category"])
        return ow.encode_packet(ow.OpenFTPacket(kind, _build(cls, body), flags))
    raise UsageError(f"unknown protocol {protocol!r}")


def cmd_codec(protocol: str, decode: Optional[str] = None, encode: Optional[str] = None) -> int:
    if (decode is None) == (encode is None):
        raise UsageError("give exactly one of --decode HEX or --encode JSON")
    if decode is not None:
        sys.stdout.write(decode_hex(protocol, decode))
    else:
        sys.stdout.write(encode_json(protocol, encode).hex() + "\n")
    return EXIT_OK


# --- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="p2psim", description="Simulate and compare P2P overlay architectures.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="run one scenario and write trace + metrics")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("compare", help="run several architectures on one workload")
    p.add_argument("--specs", required=True, help="comma-separated scenario files")
    p.add_argument("--out", required=True)
    p = sub.add_parser("codec", help="decode a hex dump or encode a JSON message")
    p.add_argument("--protocol", required=True, choices=["gnutella", "napster", "openft"])
    p.add_argument("--decode", metavar="HEX")
    p.add_argument("--encode", metavar="JSON")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "simulate":
            return cmd_simulate(args.spec, args.out)
        if args.command == "compare":
            return cmd_compare([s for s in args.specs.split(",") if s], args.out)
        return cmd_codec(args.protocol, args.decode, args.encode)
    except (UsageError, ScenarioError, WireError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
