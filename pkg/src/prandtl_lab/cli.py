"""Command-line front end.

Runs the compute layer in-process, or acts as a thin client of a running
service when ``--server URL`` is given.  Exit codes: 0 success, 1 verification
failure, 2 input or validation error, 3 runtime degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TextIO

import pydantic

from . import service
from .scenario import ParseError, evaluate, parse_expr
from .schemas import (BlowupRequest, BlowupResponse, Grid, ProfileRequest, SimulateRequest,
                      SimulateResponse, Table, VerifyResponse)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_DEGENERACY = 0, 1, 2, 3


@dataclass(frozen=True)
class OutputSpec:
    format: str = "csv"
    path: str | None = None
    precision: int = 12

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if not 6 <= self.precision <= 17:
            raise ValueError("precision must lie in [6, 17]")

    def fmt(self, v: Any) -> str:
        if v is None:
            return "nan"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return format(float(v) + 0.0, f".{self.precision}g") if isinstance(v, float) else str(v)
        return str(v)

    def round(self, v: Any) -> Any:
        if isinstance(v, float):
            return float(format(v, f".{self.precision}g")) if math.isfinite(v) else None
        if isinstance(v, dict):
            return {k: self.round(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [self.round(x) for x in v]
        return v


# -- argument parsing helpers ------------------------------------------------------

def parse_number(src: str) -> float:
    """A constant expression such as 0.5, pi or 2*pi/3."""
    try:
        return float(evaluate(parse_expr(src.strip())))
    except (ParseError, TypeError, KeyError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {src!r} ({exc})") from exc


def parse_list(src: str) -> list[float]:
    return [parse_number(s) for s in src.split(",") if s.strip()]


def parse_range(src: str) -> list[float]:
    parts = src.split()
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("range must be 'start stop count'")
    a, b, n = parse_number(parts[0]), parse_number(parts[1]), int(parts[2])
    if n < 0:
        raise argparse.ArgumentTypeError("count must be non-negative")
    if n == 0:
        return []
    if n == 1:
        return [a]
    return [a + (b - a) * k / (n - 1) for k in range(n)]


def parse_grid(src: str) -> Grid:
    parts = src.split()
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("grid must be 'x0 x1 nx y0 y1 ny'")
    try:
        return Grid(x0=parse_number(parts[0]), x1=parse_number(parts[1]), nx=int(parts[2]),
                    y0=parse_number(parts[3]), y1=parse_number(parts[4]), ny=int(parts[5]))
    except (ValueError, pydantic.ValidationError) as exc:
        raise argparse.ArgumentTypeError(f"bad grid {src!r}") from exc


def parse_window(src: str) -> tuple[float, float, float, float]:
    parts = src.split()
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window must be 'X0 X1 Y0 Y1'")
    return tuple(parse_number(p) for p in parts)


def parse_precision(src: str) -> int:
    p = int(src)
    if not 6 <= p <= 17:
        raise argparse.ArgumentTypeError("precision must lie in [6, 17]")
    return p


# -- transport -----------------------------------------------------------------------

class Backend:
    """In-process calls, or HTTP calls to a running service."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def _http(self, method: str, path: str, model, body: pydantic.BaseModel | None = None):
        import httpx

        with httpx.Client(base_url=self.server, timeout=None) as client:
            r = client.request(method, path, json=None if body is None else body.model_dump(mode="json"))
        if r.status_code == 400:
            raise service.InputError(r.json().get("message", r.text))
        if r.status_code == 422:
            raise service.InputError(r.text)
        if r.status_code == 409:
            e = r.json()
            raise service.RunDegeneracy(e.get("message", r.text), e.get("t"), e.get("x"))
        r.raise_for_status()
        return model.model_validate(r.json())

    def profile(self, req: ProfileRequest) -> Table:
        return self._http("POST", "/profile", Table, req) if self.server else service.profile_table(req)

    def blowup(self, req: BlowupRequest) -> BlowupResponse:
        return self._http("POST", "/blowup", BlowupResponse, req) if self.server else service.blowup(req)

    def simulate(self, req: SimulateRequest) -> SimulateResponse:
        return self._http("POST", "/simulate", SimulateResponse, req) if self.server else service.simulate(req)

    def verify(self, suite: str) -> VerifyResponse:
        return self._http("GET", f"/verify/{suite}", VerifyResponse) if self.server else service.verify(suite)


# -- writers ----------------------------------------------------------------------------

def _open(path: str | None) -> tuple[TextIO, bool]:
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def write_table(columns: list[str], rows: list[list], out: OutputSpec, path: str | None = None) -> None:
    fh, close = _open(path if path is not None else out.path)
    try:
        if out.format == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([out.fmt(v) for v in r])
        else:
            json.dump({"columns": columns, "rows": out.round(rows)}, fh, indent=1)
            fh.write("\n")
    finally:
        if close:
            fh.close()


def write_object(obj: dict, out: OutputSpec, path: str | None = None) -> None:
    fh, close = _open(path if path is not None else out.path)
    try:
        if out.format == "json":
            json.dump(out.round(obj), fh, indent=1)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            for k, v in _flatten(obj):
                w.writerow([k, out.fmt(v)])
    finally:
        if close:
            fh.close()


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(obj, dict):
        items = []
        for k, v in obj.items():
            items.extend(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
        return items
    if isinstance(obj, (list, tuple)):
        items = []
        for i, v in enumerate(obj):
            items.extend(_flatten(v, f"{prefix}[{i}]"))
        return items
    return [(prefix, obj)]


def _snapshot_path(base: str, t: float, many: bool) -> str:
    if not many:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}_t{t:g}{p.suffix}"))


# -- commands ----------------------------------------------------------------------------

def _read_scenario(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise service.InputError(f"cannot read scenario {path!r}: {exc.strerror}") from exc


def cmd_profile(args, backend: Backend, out: OutputSpec) -> int:
    xs, ys = args.x, args.y
    if args.range is not None:
        if args.what == "axis":
            ys = args.range
        else:
            xs = args.range
    req = ProfileRequest(kind=args.kind, what=args.what, x=xs, y=ys, grid=args.grid,
                         derivative=args.axis_what, mode=args.mode)
    table = backend.profile(req)
    write_table(table.columns, table.rows, out)
    if table.error:
        print(f"error: {table.error}", file=sys.stderr)
        return EXIT_DEGENERACY
    return EXIT_OK


def cmd_blowup(args, backend: Backend, out: OutputSpec) -> int:
    req = BlowupRequest(scenario=_read_scenario(args.scenario), t_max=args.t_max,
                        window=args.window, n=args.n)
    res = backend.blowup(req)
    write_object(res.model_dump(), out)
    return EXIT_OK


SNAPSHOT_COLUMNS = ["t", "x", "y", "u", "y_star", "x_star", "renorm_error"]


def _snapshot_rows(s) -> list[list]:
    rows = []
    for i, x in enumerate(s.x):
        for j, y in enumerate(s.y):
            rows.append([s.t, x, y, s.u[i][j], s.y_star[i], s.x_star, s.renorm_error])
        if not s.y:
            rows.append([s.t, x, None, None, s.y_star[i], s.x_star, s.renorm_error])
    return rows


def cmd_simulate(args, backend: Backend, out: OutputSpec) -> int:
    req = SimulateRequest(scenario=_read_scenario(args.scenario), times=args.times, grid=args.grid,
                          renorm=args.renorm, window=args.window, delta=args.delta)
    res = backend.simulate(req)
    many = len(res.snapshots) > 1
    if out.path is None:
        if out.format == "csv":
            rows = [r for s in res.snapshots for r in _snapshot_rows(s)]
            write_table(SNAPSHOT_COLUMNS, rows, out)
        else:
            write_object(res.model_dump(), out)
        return EXIT_OK
    for s in res.snapshots:
        path = _snapshot_path(out.path, s.t, many)
        if out.format == "csv":
            write_table(SNAPSHOT_COLUMNS, _snapshot_rows(s), out, path)
        else:
            obj = s.model_dump()
            obj.update(name=res.name, T=res.T, mu=res.mu, nu=res.nu, iota=res.iota)
            write_object(obj, out, path)
    return EXIT_OK


VERIFY_COLUMNS = ["id", "name", "passed", "measured", "tolerance", "detail", "seconds"]


def cmd_verify(args, backend: Backend, out: OutputSpec) -> int:
    res = backend.verify(args.suite)
    for c in res.checks:
        tag = "PASS" if c.passed else "FAIL"
        print(f"{tag} {c.id} {c.name}", file=sys.stderr)
    if out.format == "json":
        write_object(res.model_dump(), out)
    else:
        rows = [[c.id, c.name, c.passed, c.measured, c.tolerance, c.detail, c.seconds] for c in res.checks]
        write_table(VERIFY_COLUMNS, rows, out)
    return EXIT_OK if res.passed else EXIT_VERIFY


def cmd_serve(args, backend: Backend, out: OutputSpec) -> int:
    import uvicorn

    uvicorn.run("prandtl_lab.api:app", host=args.host, port=args.port)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prandtl-lab", description=__doc__.splitlines()[0])
    p.add_argument("--server", default=None, help="base URL of a running service")
    sub = p.add_subparsers(dest="command", required=True)

    def with_output(sp, default_format="csv"):
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=default_format)
        sp.add_argument("--precision", type=parse_precision, default=12)
        return sp

    sp = with_output(sub.add_parser("profile", help="profile tables"))
    sp.add_argument("kind", choices=("generic", "degenerate"))
    sp.add_argument("what", choices=("theta", "ystar", "axis", "asymptotics"))
    sp.add_argument("--x", type=parse_list, default=None, help="comma separated X values")
    sp.add_argument("--y", type=parse_list, default=None, help="comma separated Y values")
    sp.add_argument("--range", type=parse_range, default=None, help="'start stop count' (X, or Y for axis)")
    sp.add_argument("--grid", type=parse_grid, default=None, help="'x0 x1 nx y0 y1 ny'")
    sp.add_argument("--what", dest="axis_what", choices=("d1", "d3"), default="d1",
                    help="axis derivative order")
    sp.add_argument("--mode", choices=("restricted", "periodic"), default="restricted")
    sp.set_defaults(func=cmd_profile)

    sp = with_output(sub.add_parser("blowup", help="blow-up report"), default_format=None)
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--window", type=parse_window, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.set_defaults(func=cmd_blowup)

    sp = with_output(sub.add_parser("simulate", help="Eulerian snapshots"))
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--times", type=parse_list, required=True, help="'t1,t2,...'")
    sp.add_argument("--grid", type=parse_grid, required=True, help="'x0 x1 nx y0 y1 ny'")
    sp.add_argument("--renorm", action="store_true")
    sp.add_argument("--window", type=parse_window, default=None, help="renormalised 'X0 X1 Y0 Y1'")
    sp.add_argument("--delta", type=float, default=0.3)
    sp.set_defaults(func=cmd_simulate)

    sp = with_output(sub.add_parser("verify", help="acceptance checks"))
    sp.add_argument("--suite", default="all",
                    choices=("constants", "profiles", "residuals", "dynamics", "all"))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve, out=None, format="csv", precision=12)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = OutputSpec(args.format or "json", args.out, args.precision)
    backend = Backend(args.server)
    try:
        return args.func(args, backend, out)
    except (service.InputError, pydantic.ValidationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except service.RunDegeneracy as exc:
        where = f" (t={exc.t}, x={exc.x})" if exc.t is not None else ""
        print(f"degeneracy: {exc}{where}", file=sys.stderr)
        return EXIT_DEGENERACY


if __name__ == "__main__":
    sys.exit(main())
