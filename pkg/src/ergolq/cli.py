"""Command line front end.

Thin client of the HTTP service: every command parses the problem file
locally (for early, precise exit codes), then posts the normalized
document to the service.  By default the service runs in process over an
ASGI transport; pass --server to talk to a remote instance instead.

Exit codes: 0 ok, 2 parse error, 3 dimension error, 4 no stabilizer /
not stabilizing, 5 regularization diverging, 1 anything else.
"""

from __future__ import annotations

import asyncio
import functools
import json
import os
import sys

import click
import httpx
import numpy as np

from . import __version__, problemfile
from .errors import (
    DimensionError,
    Diverging,
    ErgolqError,
    NotStabilizing,
    ProblemFormatError,
    StabilizerNotFound,
)

_EXIT_BY_KIND = {
    "problem_format": 2,
    "dimension": 3,
    "not_stabilizing": 4,
    "stabilizer_not_found": 4,
    "diverging": 5,
}


class ServiceError(Exception):
    """A non-2xx service reply, folded into the local error taxonomy."""

    def __init__(self, kind: str, message: str, entries=None):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.entries = entries


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _fmt_vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def _fmt_mat(m) -> str:
    return "[" + ", ".join(_fmt_vec(row) for row in m) + "]"


def _load(path):
    """Parse and normalize a problem file, honoring ERGOLQ_SEED."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from exc
    problem = problemfile.parse_problem(text)
    env = os.environ.get("ERGOLQ_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise click.UsageError(f"ERGOLQ_SEED must be an integer, got {env!r}")
        problem = problemfile.with_seed(problem, seed)
    return problem, problemfile.normalize_problem(problem)


def _json_opt(text: str, name: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{name}: invalid JSON ({exc})") from exc


async def _post_inprocess(path: str, payload: dict):
    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://ergolq.local", timeout=None
    ) as client:
        return await client.post(path, json=payload)


def _post(path: str, payload: dict, server: str | None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            resp = client.post(path, json=payload)
    else:
        resp = asyncio.run(_post_inprocess(path, payload))
    if resp.status_code == 200:
        return resp.json()
    if resp.status_code == 422:
        raise ServiceError("problem_format", f"request rejected: {resp.text}")
    if resp.status_code == 400:
        body = resp.json()
        raise ServiceError(
            body.get("error_kind", "internal"),
            body.get("message", resp.text),
            body.get("entries"),
        )
    raise ServiceError("internal", f"unexpected status {resp.status_code}: {resp.text[:300]}")


def _exits(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ServiceError as exc:
            click.echo(f"error ({exc.kind}): {exc.message}", err=True)
            sys.exit(_EXIT_BY_KIND.get(exc.kind, 1))
        except ProblemFormatError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DimensionError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (NotStabilizing, StabilizerNotFound) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
        except Diverging as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(5)
        except ErgolqError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except httpx.HTTPError as exc:
            click.echo(f"transport error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _common(fn):
    fn = click.option(
        "--server",
        default=None,
        metavar="URL",
        help="base URL of a running service; default runs the service in process",
    )(fn)
    fn = click.argument("file", type=click.Path())(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="ergolq")
def main():
    """Ergodic control of linear SDEs with quadratic costs."""


@main.command()
@_common
@click.option("--pi0", default=None, help="certificate candidate P0, JSON matrix")
@click.option("--no-scan", is_flag=True, help="skip the built-in candidate scan")
@click.option(
    "--dump-normalized",
    is_flag=True,
    help="print the normalized problem document and exit",
)
@_exits
def check(file, server, pi0, no_scan, dump_normalized):
    """Stabilizer search and certificate attempts for a problem file."""
    problem, doc = _load(file)
    if dump_normalized:
        click.echo(problemfile.dump_problem(problem), nl=False)
        return
    payload = {"problem": doc, "scan": not no_scan}
    if pi0 is not None:
        payload["pi0"] = _json_opt(pi0, "--pi0")
    body = _post("/check", payload, server)

    if body["stabilizer"] is None:
        click.echo("stabilizer: not found")
    else:
        click.echo(f"stabilizer: found, margin {_fmt(body['stability_margin'])}")
        click.echo(f"  gain {_fmt_mat(body['stabilizer'])}")
    click.echo(f"positive definite weights: {'yes' if body['positive_definite'] else 'no'}")
    if body["riccati_residual"] is not None:
        click.echo(
            f"riccati solve: residual {_fmt(body['riccati_residual'])} "
            f"in {body['riccati_iterations']} iterations"
        )
    for key in ("solvability", "finiteness"):
        cert = body[key]
        if cert is None:
            click.echo(f"{key}: not attempted")
        elif cert["ok"]:
            click.echo(f"{key}: certified, value {_fmt(cert['value'])}")
            for name, val in sorted(cert["residuals"].items()):
                click.echo(f"  {name} = {_fmt(val)}")
        else:
            click.echo(f"{key}: failed ({cert['condition']}, residual {_fmt(cert['residual'])})")
    scalar = body["scalar"]
    if scalar is not None:
        click.echo(
            f"scalar family {scalar['family']}: case {scalar['case_label']}, "
            f"{scalar['description']}"
        )
    for note in body["notes"]:
        click.echo(f"note: {note}")


@main.command(name="eval")
@_common
@click.option("--theta", default=None, help="gain override, JSON matrix")
@click.option("--v", default=None, help="offset override, JSON vector")
@_exits
def eval_cmd(file, server, theta, v):
    """Average cost and stationary moments of a fixed strategy."""
    problem, doc = _load(file)
    payload = {"problem": doc}
    if theta is not None:
        payload["theta"] = _json_opt(theta, "--theta")
    if v is not None:
        payload["v"] = _json_opt(v, "--v")
    body = _post("/eval", payload, server)
    click.echo(f"ergodic cost: {_fmt(body['cost'])}")
    click.echo(f"stability margin: {_fmt(body['stability_margin'])}")
    click.echo(f"stationary mean: {_fmt_vec(body['m1'])}")
    click.echo(f"stationary second moment: {_fmt_mat(body['m2'])}")
    if body["representation_error"] is not None:
        click.echo(f"representation check, max error: {_fmt(body['representation_error'])}")


@main.command()
@_common
@_exits
def solve(file, server):
    """Optimal strategy under jointly positive definite weights."""
    problem, doc = _load(file)
    body = _post("/solve", {"problem": doc}, server)
    click.echo(f"value: {_fmt(body['value'])}")
    click.echo(f"gain: {_fmt_mat(body['theta'])}")
    click.echo(f"offset: {_fmt_vec(body['v'])}")


def _write_csv(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta,value,theta_norm,v_norm,are_residual\n")
        for e in entries:
            fh.write(
                f"{e['delta']!r},{e['value']!r},{e['theta_norm']!r},"
                f"{e['v_norm']!r},{e['are_residual']!r}\n"
            )


@main.command()
@_common
@click.option("--schedule", default=None, help="comma-separated decreasing penalty levels")
@click.option("--csv", "csv_path", default=None, type=click.Path(), help="write the trace as CSV")
@_exits
def regularize(file, server, schedule, csv_path):
    """Drive the control penalty to zero and report the value trace."""
    problem, doc = _load(file)
    payload = {"problem": doc}
    if schedule is not None:
        try:
            payload["schedule"] = [float(tok) for tok in schedule.split(",")]
        except ValueError:
            raise click.UsageError(f"--schedule must be comma-separated numbers, got {schedule!r}")
    try:
        body = _post("/regularize", payload, server)
    except ServiceError as exc:
        if exc.kind == "diverging" and exc.entries:
            for e in exc.entries:
                click.echo(f"delta {_fmt(e['delta'])}: value {_fmt(e['value'])}")
            if csv_path:
                _write_csv(csv_path, exc.entries)
        raise
    for e in body["entries"]:
        click.echo(
            f"delta {_fmt(e['delta'])}: value {_fmt(e['value'])}  "
            f"|gain| {_fmt(e['theta_norm'])}  |offset| {_fmt(e['v_norm'])}"
        )
    click.echo(f"converged: {'yes' if body['converged'] else 'no'}")
    click.echo(f"monotone: {'yes' if body['monotone'] else 'no'}")
    click.echo(f"value: {_fmt(body['limit_estimate'])}")
    if body["extrapolated"] is not None:
        click.echo(f"extrapolated (diagnostic): {_fmt(body['extrapolated'])}")
    if body["strategy_convergent"] is not None:
        click.echo(f"strategy settled: {'yes' if body['strategy_convergent'] else 'no'}")
    if csv_path:
        _write_csv(csv_path, body["entries"])


@main.command()
@_common
@click.option("--x0", default="0", help="initial state: scalar or JSON vector")
@click.option(
    "--estimator",
    type=click.Choice(["cesaro", "abel"]),
    default="cesaro",
    show_default=True,
)
@click.option("--trace", "trace_path", default=None, type=click.Path(),
              help="write a (t, state, running average) CSV for path 0")
@click.option("--stride", default=100, show_default=True, help="steps between trace rows")
@_exits
def simulate(file, server, x0, estimator, trace_path, stride):
    """Monte-Carlo estimate of the average cost of the file's strategy."""
    problem, doc = _load(file)
    try:
        x0_val = float(x0)
    except ValueError:
        x0_val = _json_opt(x0, "--x0")
    payload = {"problem": doc, "x0": x0_val, "estimator": estimator}
    body = _post("/simulate", payload, server)
    click.echo(
        f"cesaro estimate: {_fmt(body['cesaro_mean'])} "
        f"(stderr {_fmt(body['cesaro_stderr'])}, {body['n_paths']} paths)"
    )
    note = "" if body["abel_valid"] else "; horizon too short for the discount rate"
    click.echo(
        f"abel estimate: {_fmt(body['abel_mean'])} (stderr {_fmt(body['abel_stderr'])}{note})"
    )
    click.echo(f"empirical mean: {_fmt_vec(body['emp_m1'])}")
    click.echo(f"empirical second moment: {_fmt_mat(body['emp_m2'])}")
    if body["predicted_cost"] is not None:
        click.echo(f"stationary-moment prediction: {_fmt(body['predicted_cost'])}")
    if trace_path:
        from .simulate import SimConfig, trace_rows

        cfg = problem.sim if problem.sim is not None else SimConfig()
        start = np.asarray(x0_val, dtype=float)
        with open(trace_path, "w", encoding="utf-8") as fh:
            n = problem.system.n
            fh.write("t," + ",".join(f"x{i + 1}" for i in range(n)) + ",running_mean\n")
            for t, x, avg in trace_rows(
                problem.system, problem.weights, problem.strategy, start, cfg, stride
            ):
                row = [repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(avg))]
                fh.write(",".join(row) + "\n")
        click.echo(f"trace written to {trace_path}")


@main.command()
@_common
@click.option("--pi0", default=None, help="certificate candidate P0, JSON matrix")
@click.option("--no-scan", is_flag=True, help="skip the built-in candidate scan")
@_exits
def classify1d(file, server, pi0, no_scan):
    """Full classification: solvable, finite, diverging, or inconclusive."""
    problem, doc = _load(file)
    payload = {"problem": doc, "scan": not no_scan}
    if pi0 is not None:
        payload["pi0"] = _json_opt(pi0, "--pi0")
    body = _post("/classify", payload, server)
    click.echo(f"status: {body['status']}")
    if body["value"] is not None:
        click.echo(f"value: {_fmt(body['value'])}")
    if body["lower_bound"] is not None:
        click.echo(f"lower bound: {_fmt(body['lower_bound'])}")
    if body["theta"] is not None:
        click.echo(f"gain: {_fmt_mat(body['theta'])}")
        click.echo(f"offset: {_fmt_vec(body['v'])}")
    scalar = body["scalar"]
    if scalar is not None:
        click.echo(
            f"scalar family {scalar['family']}: case {scalar['case_label']}, "
            f"{scalar['description']}"
        )
        for key, val in sorted(scalar["details"].items()):
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                click.echo(f"  {key} = {_fmt(val)}")
            else:
                click.echo(f"  {key} = {val}")
    trace = body["trace"]
    if trace is not None:
        pairs = ", ".join(
            f"{_fmt(d)}:{_fmt(v)}" for d, v in zip(trace["deltas"], trace["values"])
        )
        click.echo(f"regularization values: {pairs}")
    for note in body["notes"]:
        click.echo(f"note: {note}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("ergolq.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
