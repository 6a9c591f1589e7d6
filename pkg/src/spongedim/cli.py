"""Command line front end: ``spongedim <command> --model FILE [options]``.

Exit codes: 0 success, 1 usage error, 2 invalid model, 3 computation contract
violation (degenerate input, failed identity, exhausted budget, failed verify).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import dims, oracle, sim
from .errors import BudgetExceeded, ContractError, DegenerateError, ModelError
from .measures import WeightLaw, measure_profile
from .model import extinction_probability
from .modelfile import law_from_json, load_model
from .pressure import PressureCurve

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_CONTRACT = 0, 1, 2, 3
COMMANDS = ("dim", "boxdim", "project", "measure", "conditional", "pressure", "oracle", "simulate", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spongedim", description="Dimensions of random self-affine sponges.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", help="JSON model file (schema 1)")
    p.add_argument("--law", help="JSON file holding a weight law; overrides the model's 'law'")
    p.add_argument("--level", type=int, help="projection / factor level i")
    p.add_argument("--upper", type=int, help="upper level j for conditional projected measures")
    p.add_argument("--theta", type=float, help="pressure parameter in [0, 1]")
    p.add_argument("--q", type=float, nargs="+", help="q-vector (oracle) or q-list (lq simulation)")
    p.add_argument("--depth", type=int, help="largest scale n (simulate); tree depth for survival")
    p.add_argument("--nmin", type=int, default=3, help="smallest scale n for slopes (default 3)")
    p.add_argument("--replicates", type=int, default=64, help="independent replicates (default 64)")
    p.add_argument("--points", type=int, default=100, help="mu-typical points per replicate (local)")
    p.add_argument("--seed", type=int, default=0, help="simulation seed (default 0)")
    p.add_argument("--step", type=float, default=0.01, help="oracle lattice step (default 0.01)")
    p.add_argument("--what", choices=("mgamma", "pressure", "prop41"), default="mgamma")
    p.add_argument("--mode", choices=("box", "local", "lq", "survival"), default="box")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    p.add_argument("--out", help="write output to this path instead of stdout")
    return p


# -- rendering -------------------------------------------------------------


def _fmt_value(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def _table(record: dict) -> str:
    width = max(len(k) for k in record)
    return "\n".join(f"{k.ljust(width)}  {_fmt_value(v)}" for k, v in record.items()) + "\n"


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _render(record: dict, fmt: str | None, rows=None) -> str:
    if fmt == "json":
        return json.dumps(dims._jsonable(record), indent=2, sort_keys=False) + "\n"
    if fmt == "csv":
        if rows is None:
            rows = [(k, _fmt_value(v)) for k, v in record.items()]
            return _csv_text(rows, ("field", "value"))
        return _csv_text(rows, ("replicate", "n", "statistic", "value"))
    return _table(record)


# -- commands ------------------------------------------------------------------


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"{args.command} requires --{name}")


def _law(args, spec) -> WeightLaw:
    if args.law is not None:
        path = Path(args.law)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ModelError(f"{path}: cannot read law file ({exc.strerror})") from None
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON at line {exc.lineno} ({exc.msg})") from None
        return law_from_json(doc, str(path))
    return spec.law if spec.law is not None else WeightLaw.branching()


def _report(rep: dims.DimensionReport) -> dict:
    out = rep.to_json()
    out["value"] = float(rep.value)
    return out


def cmd_dim(args, spec):
    return _report(dims.hausdorff_dim_K(spec.model))


def cmd_boxdim(args, spec):
    rec = _report(dims.box_dim_K(spec.model))
    eq = dims.dims_equal_K(spec.model)
    rec["equal_to_hausdorff"] = eq.equal
    rec["equality_witness"] = eq.witness
    return rec


def cmd_project(args, spec):
    _need(args, "level")
    m, i = spec.model, args.level
    h = dims.hausdorff_dim_projection(m, i)
    b = dims.box_dim_projection(m, i)
    eq = dims.projection_dims_equal(m, i)
    rec = _report(h)
    rec["level"] = i
    rec["box_value"] = float(b.value)
    rec["box_selector"] = b.selector
    rec["equal"] = eq.equal
    rec["equality_branch"] = eq.branch
    rec["equality_witness"] = eq.witness
    return rec


def cmd_measure(args, spec):
    law = _law(args, spec)
    m = spec.model
    prof = measure_profile(law, m)
    rec = {"law": law.to_json(), "dim_e": prof.dim_e, "value": dims.measure_dim(m, law)}
    rec["entropies"] = [prof.h(i) for i in range(1, m.k + 1)]
    if args.level is not None and args.level > 1:
        rec["level"] = args.level
        rec["projected_value"] = dims.projected_measure_dim(m, law, args.level)
    return rec


def cmd_conditional(args, spec):
    _need(args, "level")
    law = _law(args, spec)
    m, i = spec.model, args.level
    rec = {"law": law.to_json(), "level": i}
    if args.upper is None:
        rec["value"] = dims.conditional_measure_dim(m, law, i)
        rec["projected"] = dims.projected_measure_dim(m, law, i)
        rec["total"] = dims.measure_dim(m, law)
    else:
        rec["upper"] = args.upper
        rec["value"] = dims.conditional_projected_measure_dim(m, law, i, args.upper)
        rec["projected_upper"] = dims.projected_measure_dim(m, law, args.upper)
        rec["projected"] = dims.projected_measure_dim(m, law, i)
    return rec


def cmd_pressure(args, spec):
    _need(args, "level", "theta")
    curve = PressureCurve(spec.model, args.level)
    res = curve.value(args.theta)
    return {
        "level": args.level,
        "theta": args.theta,
        "value": float(res.value),
        "derivative": float(curve.derivative(args.theta)),
        "equilibrium": res.equilibrium.as_dict(),
    }


def _grid(args) -> oracle.GridSpec:
    step = args.step
    return oracle.GridSpec(step=step, final_step=min(step, 1e-3))


def cmd_oracle(args, spec):
    m, grid = spec.model, _grid(args)
    t0 = time.perf_counter()
    if args.what == "mgamma":
        val, nu = oracle.brute_force_Mgamma(m, grid)
        rec = {"what": "mgamma", "value": val, "closed_form": float(dims.hausdorff_dim_K(m).value)}
        rec["argmax"] = nu.as_dict()
    elif args.what == "pressure":
        if args.q is None:
            val, q = oracle.brute_force_minmax(m, grid)
            rec = {"what": "minmax", "value": val, "q": [float(x) for x in q]}
            rec["closed_form"] = float(dims.hausdorff_dim_K(m).value)
        else:
            val, nu = oracle.brute_force_P(m, args.q, grid)
            rec = {"what": "pressure", "q": list(args.q), "value": val, "argmax": nu.as_dict()}
    else:
        _need(args, "level")
        val, theta, nu = oracle.brute_force_prop41(m, args.level, grid=grid)
        th = m.theta_hat(args.level)
        rec = {"what": "prop41", "level": args.level, "value": val, "theta": theta}
        rec["closed_form"] = float(m.psi(args.level, th))
    rec["seconds"] = time.perf_counter() - t0
    if "closed_form" in rec:
        rec["abs_error"] = abs(rec["value"] - rec["closed_form"])
    return rec


def cmd_simulate(args, spec):
    m = spec.model
    if args.mode == "survival":
        depth = args.depth or 10
        res = sim.empirical_survival(m, depth, args.replicates, args.seed)
        rows = [(r, depth, "survived", f) for r, f in enumerate(res.pop("flags"))]
        return res, rows
    _need(args, "depth")
    ns = range(args.nmin, args.depth + 1)
    if args.mode == "box":
        est = sim.empirical_box_dim(m, ns, args.replicates, args.seed)
        rec = est.to_json()
        rec["closed_form"] = float(dims.box_dim_K(m).value)
        return rec, est.rows()
    if args.law is not None or spec.law is not None:
        law = _law(args, spec)
    else:
        law = dims.hausdorff_dim_K(m).witness
    if law is None:
        raise DegenerateError("no witness measure available; supply a law")
    if args.mode == "local":
        est = sim.empirical_local_dimension(m, law, ns, args.points, args.seed, args.replicates)
        rec = est.to_json()
        rec["closed_form"] = dims.measure_dim(m, law)
        return rec, est.rows()
    qs = args.q or [0.9, 1.0, 1.1, 2.0]
    ests = sim.empirical_Lq(m, law, qs, ns, args.replicates, args.seed)
    rec = {"law": law.to_json(), "tau": {str(q): e.to_json() for q, e in ests.items()}}
    if 0.9 in ests and 1.1 in ests:
        rec["secant"], rec["secant_se"] = sim.lq_secant(ests)
        rec["closed_form"] = dims.measure_dim(m, law)
    rows = [row for e in ests.values() for row in e.rows()]
    return rec, rows


# -- verify ------------------------------------------------------------------------


def _checks(spec, step: float):
    """Yield ``(name, ok, detail)`` for the oracle and identity suite."""
    m = spec.model
    h = dims.hausdorff_dim_K(m)
    b = dims.box_dim_K(m)
    yield "dim_H <= dim_B", h.value <= b.value + 1e-12, f"{h.value:.12g} <= {b.value:.12g}"
    if h.cross_check is not None:
        err = abs(h.value - h.cross_check)
        yield "dim_H cross-check", err <= 1e-8, f"|diff| = {err:.3g}"
    if h.witness is not None:
        err = abs(dims.measure_dim(m, h.witness) - h.value)
        yield "witness realises dim_H", err <= 1e-10, f"|diff| = {err:.3g}"
    log_ea = math.log(m.expected_size)
    for i in range(1, m.k + 1):
        err = abs(m.psi(i, 1.0) - log_ea)
        yield f"psi_{i}(1) = log E#A", err <= 1e-12, f"|diff| = {err:.3g}"
    for i in range(1, m.k):
        ts = np.linspace(0, 1, 11)
        ok = all(m.psi(i, t) >= m.psi(i + 1, t) - 1e-12 for t in ts)
        yield f"psi_{i} >= psi_{i + 1}", ok, "on an 11-point grid"
    prev = h.value
    for i in range(2, m.k + 1):
        v = float(dims.hausdorff_dim_projection(m, i).value)
        yield f"dim_H Pi_{i} K <= dim_H Pi_{i - 1} K", v <= prev + 1e-12, f"{v:.12g} <= {prev:.12g}"
        prev = v
    law = spec.law if spec.law is not None else WeightLaw.branching()
    try:
        prof = measure_profile(law, m)
        if prof.nondegenerate:
            total = dims.measure_dim(m, law)
            for i in range(2, m.k + 1):
                c = dims.conditional_measure_dim(m, law, i)
                p = dims.projected_measure_dim(m, law, i)
                err = abs(total - c - p)
                yield f"conservation at level {i}", err <= 1e-12, f"|diff| = {err:.3g}"
    except (DegenerateError, ModelError) as exc:
        yield "measure identities", True, f"skipped ({exc})"
    q_ext = extinction_probability(m)
    yield "extinction fixed point", abs(m.generating_function(q_ext) - q_ext) <= 1e-10, f"q = {q_ext:.12g}"
    if len(m.support(1)) <= oracle.GridSpec().max_cells:
        grid = oracle.GridSpec(step=step, final_step=min(step, 1e-3))
        val, _ = oracle.brute_force_Mgamma(m, grid)
        err = abs(val - h.value)
        yield "oracle M^gamma = dim_H", err <= 5e-3, f"|diff| = {err:.3g}"
        mm, _ = oracle.brute_force_minmax(m, grid)
        err = abs(mm - val)
        yield "min-max = max-min", err <= 5e-3, f"|diff| = {err:.3g}"
    else:
        yield "oracle M^gamma = dim_H", True, f"skipped (#Ã_1 > {oracle.GridSpec().max_cells})"


def cmd_verify(args, spec):
    results = list(_checks(spec, args.step))
    rec = {
        "checks": [{"name": n, "pass": bool(ok), "detail": d} for n, ok, d in results],
        "passed": all(ok for _, ok, _ in results),
    }
    return rec


HANDLERS = {
    "dim": cmd_dim,
    "boxdim": cmd_boxdim,
    "project": cmd_project,
    "measure": cmd_measure,
    "conditional": cmd_conditional,
    "pressure": cmd_pressure,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.model is None:
            raise UsageError(f"{args.command} requires --model")
        spec = load_model(args.model)
        result = HANDLERS[args.command](args, spec)
        rows = None
        if args.command == "simulate":
            result, rows = result
            if args.fmt is None and args.out is not None:
                args.fmt = "csv"
        if args.command == "verify" and args.fmt is None:
            text = "".join(
                f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}  ({c['detail']})\n" for c in result["checks"]
            )
        else:
            text = _render(result, args.fmt, rows)
        _emit(text, args.out)
        if args.command == "verify" and not result["passed"]:
            return EXIT_CONTRACT
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DegenerateError, ContractError, BudgetExceeded) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
