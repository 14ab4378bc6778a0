"""Command-line front end: ``demvar <command> <model> [options]``.

Exit codes: 0 success, 1 model error, 2 violated analysis assumption,
3 budget refusal, 4 internal invariant violation. Reports go to stdout as
canonical JSON; diagnostics to stderr.
"""

import argparse
import math
import sys

from . import accrew, oracle, wreach
from .config import AnalysisConfig
from .errors import DemvarError, ModelError
from .lp import build_flow
from .model import validate
from .parse import _fmt_num, emit_report, format_model, parse_model, to_json
from .preprocess import check_finite, collapse

COMMANDS = ("validate", "preprocess", "maxvar", "demvar", "nds", "chebyshev",
            "simulate", "oracle", "export-qp")


def _parser():
    p = argparse.ArgumentParser(prog="demvar", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model", help="model file in the demvar text format")
    p.add_argument("--tolerance", type=float, default=1e-9, help="value tolerance (double mode)")
    p.add_argument("--rational", action="store_true", help="exact rational arithmetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--k", type=float, action="append", help="Chebyshev factor (repeatable)")
    p.add_argument("--bound", type=int, help="reward-counter bound for the unfolding (heuristic if below B)")
    p.add_argument("--max-unfold-states", type=int, default=5_000_000)
    p.add_argument("--exact-oracle", action="store_true", help="always cross-check by enumeration")
    p.add_argument("--json", action=argparse.BooleanOptionalAction, default=True,
                   help="JSON output (default); --no-json prints a short summary")
    p.add_argument("--kind", choices=("max", "demonic"), default="max", help="export-qp objective")
    return p


def config_from(args):
    return AnalysisConfig(
        exact=args.rational,
        value_tol=args.tolerance,
        seed=args.seed,
        samples=args.samples,
        bound_override=args.bound,
        max_unfold_states=args.max_unfold_states,
        exact_oracle=args.exact_oracle,
        ks=tuple(args.k) if args.k else (1.5, 2.0, 3.0),
    )


def _load(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    return parse_model(data)


# --- export ----------------------------------------------------------------

def _lin(terms):
    return " + ".join(f"{_fmt_num(c)}*{v}" for v, c in terms if c != 0) or "0"


def export_qp(m, kind="max", config=None):
    """Textual quadratic / bilinear program over the flow polytope.

    Reward models are unfolded first (bound from the config, else B or B').
    """
    config = (config or AnalysisConfig()).with_(exact=True)
    if kind not in ("max", "demonic"):
        raise ValueError(f"unknown program kind {kind!r}")
    generalized = False
    if m.mode == "reward":
        prep = accrew.prepare(m, config)
        ctx = prep.ctx
        sound = ctx.B if kind == "max" else ctx.Bprime
        bound = config.bound_override if config.bound_override is not None else math.floor(sound)
        u = accrew.unfold(prep.collapsed, ctx, bound, config)
        pm, payoff = u.mdp, u.payoff
        generalized = True
    else:
        pm, _ = collapse(m)
        payoff = wreach.Payoff.from_weights(pm, config)
    fp = build_flow(pm)
    copies = [""] if kind == "max" else ["", "'"]
    lines = [f"# {kind} program, {len(fp.lp.rows)} flow rows per copy"]

    def var(j, prime):
        name = fp.lp.names[j]
        head, rest = name.split("[", 1)
        return f"{head}{prime}[{rest}"

    for prime in copies:
        for name, row, rhs in zip(fp.lp.row_names, fp.lp.rows, fp.lp.b):
            terms = [(var(j, prime), row[j]) for j in sorted(row)]
            lines.append(f"{name}{prime}: {_lin(terms)} = {rhs}")
        ys = [(f"y{prime}[{pm.states[q]}]", q) for q in fp.yvars]
        e1 = [(v, payoff.a.get(q, 0)) for v, q in ys] + [(f"e1{prime}", -1)]
        e2 = [(v, payoff.b.get(q, 0)) for v, q in ys] + [(f"e2{prime}", -1)]
        lines.append(f"mom_e1{prime}: {_lin(e1)} = 0")
        lines.append(f"mom_e2{prime}: {_lin(e2)} = 0")
    if kind == "max":
        lines.append("max: e2 - e1*e1")
    elif generalized:
        lines.append("# demonic variance = 0.5 * objective")
        lines.append("max: e2 - 2*e1*e1' + e2'")
    else:
        terms = []
        for q in fp.yvars:
            for r in fp.yvars:
                d = payoff.a[q] - payoff.a[r]
                if d:
                    terms.append(f"0.5*{_fmt_num(d * d)}*y[{pm.states[q]}]*y'[{pm.states[r]}]")
        lines.append("max: " + (" + ".join(terms) or "0"))
    return "\n".join(lines) + "\n"


# --- commands ---------------------------------------------------------------

def _cmd_validate(m, config, args):
    problems = validate(m)
    out = {"valid": not problems, "violations": problems, "mode": m.mode,
           "states": m.n, "actions": len(m.actions)}
    if m.mode == "reward":
        out["finite"] = check_finite(m)
    return out


def _prepared(m, config):
    if m.mode == "reward":
        prep = accrew.prepare(m, config)
        return prep.collapsed, prep
    pm, _ = collapse(m)
    return pm, None


def _cmd_simulate(m, config, args):
    pm, prep = _prepared(m, config)
    if prep is None:
        res = wreach.demonic_variance(pm, config)
    else:
        res = accrew.acc_demonic_variance(m, config, prep)
    pair = res.witness
    n = config.samples
    xy = oracle.sample_pairs(pm, pair[0], pair[1], n, config.seed)
    diff = abs(xy[:, 0] - xy[:, 1])
    est = oracle.simulate_pair(pm, pair[0], pair[1], n, config.seed)
    dem = float(res.value)
    table = []
    for k in config.ks:
        freq = float((diff >= k * math.sqrt(dem)).mean()) if dem > 0 else None
        table.append({"k": k, "bound": wreach.chebyshev_bound(k), "empirical": freq})
    return {
        "demvar": res.value,
        "estimate": est.mean,
        "stderr": est.stderr,
        "samples": n,
        "seed": config.seed,
        "chebyshev": table,
    }


def _cmd_oracle(m, config, args):
    pm, prep = _prepared(m, config)
    if prep is None:
        target, payoff = pm, None
        mx = wreach.max_variance(pm, config).value
        dm = wreach.demonic_variance(pm, config.with_(auto_oracle=False)).value
    else:
        if prep.ctx.trivial:
            v = accrew.acc_max_variance(m, config, prep).value
            return {"maxvar": v, "demvar": v, "hull_maxvar": v, "exact_demvar": v,
                    "note": "no reachable expectation-losing action; single variance"}
        mres = accrew.acc_max_variance(m, config, prep)
        u = accrew.unfold(pm, prep.ctx, mres.info["bound"], config)
        target, payoff = u.mdp, u.payoff
        mx = mres.value
        dres = accrew.acc_demonic_variance(m, config.with_(auto_oracle=False), prep)
        dm = dres.value
        if dres.info["bound"] != mres.info["bound"]:
            ud = accrew.unfold(pm, prep.ctx, dres.info["bound"], config)
            ov, keys = oracle.exact_demvar(ud.mdp, config, ud.payoff, cap=config.md_cap)
            hv = oracle.hull_maxvar(target, config, payoff, cap=config.md_cap)
            return _oracle_out(mx, dm, hv, ov)
    hv = oracle.hull_maxvar(target, config, payoff, cap=config.md_cap)
    ov, _ = oracle.exact_demvar(target, config, payoff, cap=config.md_cap)
    return _oracle_out(mx, dm, hv, ov)


def _oracle_out(mx, dm, hv, ov):
    return {"maxvar": mx, "hull_maxvar": hv, "maxvar_gap": hv - mx,
            "demvar": dm, "exact_demvar": ov, "demvar_gap": ov - dm}


def run(argv=None, stdout=None, stderr=None):
    """Run one command; returns the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    try:
        config = config_from(args)
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    try:
        m = _load(args.model)
        cmd = args.command
        if cmd == "validate":
            out = _cmd_validate(m, config, args)
        elif cmd == "preprocess":
            if m.mode == "reward":
                pm = accrew.prepare(m, config).collapsed
            else:
                pm, _ = collapse(m)
            stdout.write(format_model(pm))
            return 0
        elif cmd == "export-qp":
            stdout.write(export_qp(m, args.kind, config))
            return 0
        elif cmd in ("maxvar", "demvar", "nds", "chebyshev"):
            out = wreach.analyze(m, config, need_nds=(cmd == "nds"))
        elif cmd == "simulate":
            out = _cmd_simulate(m, config, args)
        else:
            out = _cmd_oracle(m, config, args)
    except DemvarError as exc:
        print(f"error: {exc}", file=stderr)
        return exc.exit_code
    if args.json:
        data = emit_report(out).decode("utf-8")
    else:
        d = out.as_dict() if hasattr(out, "as_dict") else out
        keys = [k for k in ("mode", "maxvar", "demvar", "nds") if k in d] or sorted(d)
        data = "\n".join(f"{k}: {to_json(d[k])}" for k in keys) + "\n"
    stdout.write(data)
    return 0


def main():
    sys.exit(run())
