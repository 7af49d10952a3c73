"""Command line: ``poissonfam run ACTION SYSTEM [flags]``, ``poissonfam scenario FILE``, ``poissonfam schema``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from typing import Sequence

from pydantic import ValidationError

from .runner import OUTPUT_ENV, ScenarioError, run
from .scenario import Scenario, load_scenario, schemas

__all__ = ["main"]

EXIT_OK, EXIT_CHECK, EXIT_SCHEMA = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


_NEGATIVE_LIST = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: Sequence[str]) -> list[str]:
    """``--b -1,2`` would read ``-1,2`` as an option; rewrite it as ``--b=-1,2``."""
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_LIST.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poissonfam", description="Poisson structure family toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one action on a catalog system")
    r.add_argument("action", choices=["verify", "reduce", "integrate", "all"])
    r.add_argument("system", help="catalog name: lv3, qp-lv3, circle-maps, nlv")
    r.add_argument("--n", type=int)
    r.add_argument("--a", type=_floats)
    r.add_argument("--b", type=_floats)
    r.add_argument("--c", type=_floats)
    r.add_argument("--k", type=float)
    r.add_argument("--omega-sign", type=int, choices=[-1, 1])
    r.add_argument("--hamiltonian", help="prefix-notation text in x1..xn")
    r.add_argument("--points", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--x0", type=_floats)
    r.add_argument("--t-end", type=float)
    r.add_argument("--rtol", type=float)
    r.add_argument("--atol", type=float)
    r.add_argument("--x", type=_floats, help="point to reduce")
    r.add_argument("--tau-end", type=float, help="also run the reduced flow up to this reduced time")
    r.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./poissonfam-out)")

    s = sub.add_parser("scenario", help="run a YAML/JSON scenario file")
    s.add_argument("file")
    s.add_argument("--out")

    sc = sub.add_parser("schema", help="print the JSON schema of scenarios or reports")
    sc.add_argument("which", choices=["scenario", "report"], nargs="?", default="scenario")
    return p


def _scenario_from_args(ns: argparse.Namespace) -> dict:
    system = {"catalog": ns.system}
    for key in ("n", "a", "b", "c", "k", "omega_sign", "hamiltonian"):
        v = getattr(ns, key)
        if v is not None:
            system[key] = v
    doc: dict = {"system": system, "action": ns.action}
    sampling = {k: v for k, v in (("points", ns.points), ("seed", ns.seed)) if v is not None}
    integ = {
        k: v
        for k, v in (("x0", ns.x0), ("t_end", ns.t_end), ("rtol", ns.rtol), ("atol", ns.atol))
        if v is not None
    }
    red = {k: v for k, v in (("x", ns.x), ("tau_end", ns.tau_end)) if v is not None}
    if sampling:
        doc["sampling"] = sampling
    if integ:
        doc["integration"] = integ
    if red:
        doc["reduce"] = red
    return doc


def _summary(result) -> str:
    lines = []
    for c in result.report["checks"]:
        tol = "" if c["tolerance"] is None else f" (tol {c['tolerance']:g})"
        lines.append(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}{tol}")
    lines.append(f"report: {result.paths['report']}")
    if "trajectory" in result.paths:
        lines.append(f"trajectory: {result.paths['trajectory']}")
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    ns = _parser().parse_args(_glue_negative_values(sys.argv[1:] if argv is None else argv))
    if ns.command == "schema":
        print(json.dumps(schemas()[ns.which], indent=2, sort_keys=True))
        return EXIT_OK
    try:
        if ns.command == "run":
            scn = Scenario.model_validate(_scenario_from_args(ns))
        else:
            scn = load_scenario(ns.file)
        result = run(scn, ns.out)
    except (ValidationError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:  # yaml errors and the like are still input problems
        if type(exc).__module__.startswith("yaml"):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        raise
    print(_summary(result))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
