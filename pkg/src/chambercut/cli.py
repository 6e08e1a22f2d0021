"""Command-line interface: ``chambercut <command> --spec job.json [options]``.

Exit codes: 0 success, 2 partial results (failed flows or paths, see the
report diagnostics), 1 fatal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import report as report_io
from .errors import ChambercutError, EvaluationError
from .flow import FlowOptions
from .pipeline import (JobSpec, atomic_write, make_routing, run_critical, run_regions,
                       witness_set)
from .regions import attach_root_counts, membership
from .rng import SeedStreams

log = logging.getLogger("chambercut")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _spec(args) -> JobSpec:
    if args.spec is None and args.fixture is None:
        raise SystemExit("either --spec or --fixture is required")
    if args.spec is not None:
        spec = JobSpec.load(args.spec)
    else:
        spec = JobSpec.from_fixture(args.fixture, args.mode)
    if args.seed is not None:
        spec.seed = int(args.seed)
    return spec


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data: dict):
    atomic_write(path, report_io.dumps(data))


def _routing_for(spec: JobSpec, args, report=None):
    """Routing function for follow-up commands, matching a report's c and e when given."""
    streams = SeedStreams(spec.seed)
    pws = None if spec.mode == "explicit" else witness_set(spec.witness_system(), streams, args.cache)
    if report is not None:
        spec.exponent = report.exponent
        return make_routing(spec, streams, pws, report.center), pws
    return make_routing(spec, streams, pws), pws


def _parse_points(args, k: int) -> np.ndarray:
    pts = []
    for text in args.point or []:
        pts.append([float(v) for v in text.split(",")])
    if args.points:
        with open(args.points) as fh:
            pts.extend(json.load(fh))
    arr = np.array(pts, dtype=float)
    if arr.size == 0:
        raise SystemExit("no query points given (use --point or --points)")
    if arr.ndim != 2 or arr.shape[1] != k:
        raise SystemExit(f"query points must have {k} coordinates")
    return arr


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_regions(args) -> int:
    spec = _spec(args)
    run = run_regions(spec, args.cache)
    data = report_io.run_to_dict(run)
    path = _out(args) / "report.json"
    _write_json(path, data)
    rep = run.report
    print(f"degH={data['degH']} e={data['e']} routing_points={len(rep.points)} "
          f"regions={len(rep.classes)} sizes={rep.sizes} euler={rep.euler}")
    if spec.root_counts:
        print("root counts:", [c.root_count for c in rep.classes])
    for w in data["diagnostics"]["warnings"]:
        print("warning:", w, file=sys.stderr)
    print(f"report written to {path}")
    return EXIT_PARTIAL if run.partial else EXIT_OK


def cmd_degree(args) -> int:
    spec = _spec(args)
    if spec.mode == "explicit":
        deg = spec.explicit_h().degree
        data = {"schema": report_io.SCHEMA, "degH": deg, "mode": "explicit"}
    else:
        warnings: list = []
        pws = witness_set(spec.witness_system(), SeedStreams(spec.seed), args.cache, warnings)
        deg = pws.degH
        data = {"schema": report_io.SCHEMA, "degH": deg, "mode": spec.mode, "mult": pws.mult,
                "reduced": bool(pws.reduced), "complete": pws.complete,
                "cluster_sizes": list(pws.cluster_sizes), "counts": pws.counts,
                "warnings": warnings}
    _write_json(_out(args) / "degree.json", data)
    print(deg)
    return EXIT_OK


def cmd_critical_points(args) -> int:
    spec = _spec(args)
    rf, _ = _routing_for(spec, args)
    cps, points, rejected = run_critical(spec, rf, SeedStreams(spec.seed))
    data = {"schema": report_io.SCHEMA, "e": rf.exponent, "c": rf.center.tolist(),
            "complex_critical_points": [report_io._c(x) for x in cps.points],
            "routing_points": [p.to_dict() for p in points], "rejected": rejected,
            "stats": cps.stats}
    _write_json(_out(args) / "critical_points.json", data)
    print(f"complex={len(cps.points)} real={len(points)} "
          f"indices={[p.index for p in points]}")
    return EXIT_PARTIAL if cps.stats.get("endgame_failures") else EXIT_OK


def cmd_membership(args) -> int:
    spec = _spec(args)
    rep = report_io.read(args.report)
    rf, _ = _routing_for(spec, args, rep)
    pts = _parse_points(args, rf.k)
    rows, partial = [], False
    for z in pts:
        cls, res = membership(rf, rep.partition, rep.points, z, FlowOptions())
        partial |= cls is None
        rows.append({"point": z.tolist(), "class": cls, "status": res.status,
                     "limit": res.limit, "reason": res.reason})
        print(f"{','.join(f'{v:g}' for v in z)} -> "
              f"{cls if cls is not None else 'unknown (' + (res.reason or res.status) + ')'}")
    _write_json(_out(args) / "membership.json", {"schema": report_io.SCHEMA, "queries": rows})
    return EXIT_PARTIAL if partial else EXIT_OK


def contour_rows(rf, bbox, nx: int, ny: int):
    """Rows (x, y, value or None) of relative log r on a grid; gaps are None."""
    x0, x1, y0, y1 = bbox
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([0.5 * (x0 + x1)])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([0.5 * (y0 + y1)])
    rows = []
    for y in ys:
        for x in xs:
            try:
                val = rf.log_value(np.array([x, y]))[0]
                if not np.isfinite(val):
                    val = None
            except (EvaluationError, np.linalg.LinAlgError):
                val = None
            rows.append((float(x), float(y), val))
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["x", "y", "value"])
    for x, y, v in rows:
        w.writerow([repr(x), repr(y), "" if v is None else repr(float(v))])
    return buf.getvalue()


def cmd_contour(args) -> int:
    spec = _spec(args)
    if spec.k != 2:
        print("contour needs a 2-dimensional parameter space", file=sys.stderr)
        return EXIT_FATAL
    rep = report_io.read(args.report) if args.report else None
    rf, _ = _routing_for(spec, args, rep)
    bbox = [float(v) for v in args.bbox.split(",")]
    if len(bbox) != 4:
        raise SystemExit("--bbox takes xmin,xmax,ymin,ymax")
    nx, ny = (int(v) for v in (args.grid.split(",") * 2)[:2])
    rows = contour_rows(rf, bbox, nx, ny)
    path = _out(args) / "contour.csv"
    atomic_write(path, format_csv(rows))
    gaps = sum(v is None for _, _, v in rows)
    print(f"{len(rows)} cells ({gaps} gaps) written to {path}")
    return EXIT_OK


def cmd_root_counts(args) -> int:
    spec = _spec(args)
    rep = report_io.read(args.report)
    G = spec.source_system()
    if G is None:
        print("root counts need a source system (discriminant mode)", file=sys.stderr)
        return EXIT_FATAL

    class _R:  # the fields attach_root_counts touches
        classes = rep.classes
    attach_root_counts(_R, G, args.count_mode, SeedStreams(spec.seed).generator("gamma"))
    table = [{"class": i, "sample": c.sample_coords, "count": c.root_count,
              "note": c.root_count_note} for i, c in enumerate(rep.classes)]
    for row in table:
        print(f"class {row['class']}: {row['count'] if row['count'] is not None else row['note']}")
    _write_json(_out(args) / "root_counts.json",
                {"schema": report_io.SCHEMA, "mode": args.count_mode, "counts": table})
    return EXIT_PARTIAL if any(r["count"] is None for r in table) else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="job specification (JSON)")
    common.add_argument("--fixture", help="use a shipped fixture instead of --spec")
    common.add_argument("--mode", choices=["explicit", "projection", "discriminant"],
                        help="mode for --fixture")
    common.add_argument("--seed", type=int, help="override the spec's 64-bit seed")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; evaluation is vectorized in-process")
    common.add_argument("--cache", help="directory for cached pseudo-witness sets")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="chambercut",
                                description="Regions of the real complement of a hypersurface.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("regions", parents=[common], help="full region computation")
    sub.add_parser("degree", parents=[common], help="degree of the hypersurface")
    sub.add_parser("critical-points", parents=[common], help="critical points of the routing function")
    m = sub.add_parser("membership", parents=[common], help="region of query points")
    m.add_argument("--report", required=True)
    m.add_argument("--point", action="append", help="comma-separated coordinates (repeatable)")
    m.add_argument("--points", help="JSON file with a list of points")
    c = sub.add_parser("contour", parents=[common], help="grid of relative log r values (CSV)")
    c.add_argument("--report", help="take c and e from this report")
    c.add_argument("--bbox", default="-1,1,-1,1", help="xmin,xmax,ymin,ymax")
    c.add_argument("--grid", default="50", help="n or nx,ny")
    r = sub.add_parser("root-counts", parents=[common], help="real root counts per region")
    r.add_argument("--report", required=True)
    r.add_argument("--count-mode", choices=["real", "nonnegative"], default="real")
    return p


COMMANDS = {"regions": cmd_regions, "degree": cmd_degree, "critical-points": cmd_critical_points,
            "membership": cmd_membership, "contour": cmd_contour, "root-counts": cmd_root_counts}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ChambercutError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
