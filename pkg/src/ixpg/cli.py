"""Command-line front end.

Every command writes one JSON report (sorted keys, rationals as "p/q"
strings) that cites the instance hash, so ``verify`` can re-check it later.
Exit codes: 0 ok, 2 invalid input, 3 verification failure, 4 size cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import approx, generate, multi, oracle
from .dynamics import stabilize, stabilize_alpha
from .model import (Instance, InvalidInstance, SizeCapExceeded, State, is_alpha_stable,
                    is_stable, social_cost, strategy_label, to_rat)
from .payments import (NotOptimalError, direct_payment_scheme,
                       doubled_weights, peering_payments, tradeoff_check)

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_CAP = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, reasons=()):
        super().__init__(message)
        self.code, self.kind, self.reasons = code, kind, list(reasons)


# ---- encoding helpers -------------------------------------------------------

def rat(x) -> str:
    return str(Fraction(x))


def ratio_field(x):
    return "unbounded" if x == math.inf else rat(x)


def enc_single(s) -> list:
    return [None if x is None else int(x) for x in s]


def dec_single(data, instance: Instance) -> tuple:
    if not isinstance(data, list) or len(data) != instance.n:
        raise CliError(EXIT_INVALID, "invalid_report", "assignment has the wrong length")
    out = []
    for x in data:
        if x is not None and not (isinstance(x, int) and 0 <= x < instance.m):
            raise CliError(EXIT_INVALID, "invalid_report", f"bad strategy {x!r}")
        out.append(x)
    return tuple(out)


def enc_multi(s) -> list:
    return [sorted(int(k) for k in x) for x in s]


def enc_matrix(rows) -> list:
    return [[rat(v) for v in row] for row in rows]


def dec_matrix(rows) -> tuple:
    try:
        return tuple(tuple(to_rat(v) for v in row) for row in rows)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise CliError(EXIT_INVALID, "invalid_report", f"bad rational: {exc}") from None


def agent_label(i: int) -> str:
    return f"agent {i + 1}"


def dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def write_out(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def load_instance(path: str) -> Instance:
    try:
        with open(path) as fh:
            return Instance.from_json(fh.read())
    except OSError as exc:
        raise CliError(EXIT_INVALID, "invalid_input", f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, InvalidInstance, TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, "invalid_instance", str(exc)) from None


def base_report(kind: str, instance: Instance) -> dict:
    return {"kind": kind, "instance_hash": instance.digest(), "n": instance.n, "m": instance.m}


def parse_range(text: str):
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI integers, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError("range must satisfy 0 <= LO <= HI")
    return lo, hi


def parse_rat(text: str) -> Fraction:
    try:
        return to_rat(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


# ---- commands ---------------------------------------------------------------

def cmd_gen(args) -> dict:
    if args.fixture:
        inst = generate.fixture(args.fixture, args.eps)
    else:
        if args.n is None or args.m is None or args.seed is None:
            raise CliError(EXIT_INVALID, "invalid_params", "random generation needs --n, --m and --seed")
        try:
            inst = generate.random_instance(args.n, args.m, args.seed, args.cc_range, args.dc_range,
                                            args.fcost_range, args.density, args.denominator)
        except ValueError as exc:
            raise CliError(EXIT_INVALID, "invalid_params", str(exc)) from None
    return inst.to_dict()


def _solve(instance: Instance, method: str, use_multi: bool, seed) -> dict:
    rep = base_report("solution", instance)
    rep.update({"method": method, "multi": use_multi})
    if method == "brute":
        s, cost = oracle.brute_force_optimum(instance, "multi" if use_multi else "single")
        rep["assignment"] = enc_multi(s) if use_multi else enc_single(s)
        rep["cost"] = rat(cost)
        return rep
    if method in ("lp-det", "lp-rand"):
        sol = approx.solve_relaxation(instance)
        if method == "lp-det":
            r = approx.round_deterministic(sol, instance)
        else:
            if seed is None:
                raise CliError(EXIT_INVALID, "invalid_params", "lp-rand needs --seed")
            r = approx.round_randomized(sol, instance, seed)
            rep.update({"seed": seed, "runs": r.runs})
        rep["lp"] = {
            "objective": repr(sol.objective),
            "x_ik": [[repr(float(v)) for v in row] for row in sol.x_ik],
            "x_k": [repr(float(v)) for v in sol.x_k],
        }
        rep["rounded"] = {
            "x_ik": r.x_ik.tolist(),
            "x_ij": r.x_ij.tolist(),
            "x_k": r.x_k.tolist(),
            "objective": rat(r.objective),
        }
        rep["assignment"] = enc_multi(r.assignment)
        rep["cost"] = rat(multi.social_cost_multi(instance, r.assignment))
        proj = approx.single_projection(instance, r.assignment)
        rep["single_projection"] = {"assignment": enc_single(proj), "cost": rat(social_cost(instance, proj))}
        return rep
    if method == "labeling-reduce":
        try:
            lab = approx.to_uniform_labeling(instance)
        except ValueError as exc:
            raise CliError(EXIT_INVALID, "invalid_params", str(exc)) from None
        rep["labeling"] = lab.to_dict()
        labeling, cost = approx.solve_labeling_exhaustive(lab)
        rep["labels"] = [lab.labels[l] for l in labeling]
        rep["assignment"] = enc_single(approx.labeling_to_assignment(labeling, instance.m))
        rep["cost"] = rat(cost)
        return rep
    raise CliError(EXIT_INVALID, "invalid_params", f"unknown method {method}")


def cmd_solve(args) -> dict:
    return _solve(load_instance(args.instance), args.method, args.multi, args.seed)


def cmd_stabilize(args) -> dict:
    inst = load_instance(args.instance)
    alpha = args.alpha if args.alpha is not None else Fraction(1)
    if not 1 <= alpha <= 2:
        raise CliError(EXIT_INVALID, "invalid_params", "--alpha must lie in [1, 2]")
    rep = base_report("state", inst)
    rep.update({"multi": args.multi, "alpha": rat(alpha), "start": args.start})
    mode = "multi" if args.multi else "single"
    opt = None
    try:
        s_opt, opt = oracle.brute_force_optimum(inst, mode)
    except SizeCapExceeded:
        if args.start == "optimum":
            raise
    start = s_opt if args.start == "optimum" else None
    if args.multi:
        state, trace = multi.stabilize_multi(inst, start, alpha)
        rep["assignment"] = enc_multi(state.assignment)
        cost = multi.social_cost_multi(inst, state.assignment)
    else:
        state, trace = stabilize_alpha(inst, alpha, start) if alpha != 1 else stabilize(inst, start)
        rep["assignment"] = enc_single(state.assignment)
        cost = social_cost(inst, state.assignment)
    rep["prices"] = enc_matrix(state.prices)
    rep["cost"] = rat(cost)
    rep["trace"] = [step.to_dict() for step in trace.steps]
    rep["initial_phi"] = rat(trace.initial_phi)
    if opt is not None:
        rep["opt_cost"] = rat(opt)
        rep["ratio"] = ratio_field(cost / opt if opt else (Fraction(1) if cost == 0 else math.inf))
    if args.trace:
        write_out(trace.to_jsonl(), args.trace)
    return rep


def cmd_payments(args) -> dict:
    inst = load_instance(args.instance)
    s, opt = oracle.brute_force_optimum(inst, "single")
    rep = base_report("payments", inst)
    rep.update({"mode": args.mode, "assignment": enc_single(s), "opt_cost": rat(opt)})
    if args.mode == "direct":
        res = direct_payment_scheme(inst, s)
        rep["prices"] = enc_matrix(res.state.prices)
        rep["delta"] = [rat(v) for v in res.delta]
        rep["total_delta"] = rat(res.total)
        rep["p"] = []
        rep["feasible"] = True
    else:
        res = peering_payments(inst, s)
        rep["feasible"] = res.feasible
        if not res.feasible:
            rep["cut"] = sorted(res.cut)
            rep["facility"] = res.facility
            return rep
        rep["prices"] = enc_matrix(res.state.prices)
        rep["delta"] = [rat(v) for v in res.delta]
        rep["p"] = [{"i": i, "j": j, "amount": rat(res.p[i][j])}
                    for i in range(inst.n) for j in range(inst.n) if res.p[i][j] > 0]
        if args.mode == "double":
            rep["kind"] = "doubled"
            rep["doubled_instance"] = doubled_weights(inst, s, res).to_dict()
    state = res.state
    rep["gamma"] = {strategy_label(k): [rat(row[k]) for row in state.prices] for k in range(inst.m)}
    return rep


def analysis_report(inst: Instance) -> dict:
    r = oracle.analyze(inst)
    t = tradeoff_check(inst)
    rep = base_report("analysis", inst)
    rep.update({
        "optimum": enc_single(r.optimum),
        "opt_cost": rat(r.opt_cost),
        "pos": ratio_field(r.pos),
        "poa": ratio_field(r.poa),
        "unbounded": r.poa == math.inf,
        "stabilizable": len(r.stabilizable),
        "delta": rat(t.delta),
        "tradeoff_ok": t.ok,
        "witness_ok": t.witness_ok,
    })
    return rep


def cmd_analyze(args) -> dict:
    return analysis_report(load_instance(args.instance))


# ---- verify -------------------------------------------------------------------

def _state_reasons(cert) -> list:
    reasons = [f"facility f{k + 1} not budget balanced" for k in cert.unbalanced]
    reasons += [f"{agent_label(i)} unstable" for i in cert.unstable_agents]
    return reasons


def _single_state(inst, report) -> State:
    s = dec_single(report.get("assignment"), inst)
    try:
        return State(inst, s, dec_matrix(report.get("prices")))
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_VERIFY, "verification_failed", str(exc), [str(exc)]) from None


def _multi_state(inst, report) -> multi.MultiState:
    try:
        s = tuple(frozenset(x) for x in report.get("assignment"))
        return multi.MultiState(inst, s, dec_matrix(report.get("prices")))
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_VERIFY, "verification_failed", str(exc), [str(exc)]) from None


def verify_report(inst: Instance, report: dict) -> list:
    """Reasons the report fails against the instance (empty when it holds)."""
    if report.get("instance_hash") != inst.digest():
        return ["instance hash mismatch"]
    kind = report.get("kind")
    reasons = []
    if kind == "state":
        alpha = to_rat(report.get("alpha", "1"))
        if report.get("multi"):
            st = _multi_state(inst, report)
            cert = multi.is_alpha_stable_multi(st, alpha) if alpha != 1 else multi.is_stable_multi(st)
            cost = multi.social_cost_multi(inst, st.assignment)
        else:
            st = _single_state(inst, report)
            cert = is_alpha_stable(st, alpha) if alpha != 1 else is_stable(st)
            cost = social_cost(inst, st.assignment)
        reasons += _state_reasons(cert)
        if to_rat(report.get("cost")) != cost:
            reasons.append("reported cost does not match")
    elif kind in ("payments", "doubled"):
        if not report.get("feasible"):
            return ["report records an infeasible circulation"]
        st = _single_state(inst, report)
        delta = dec_matrix([report.get("delta")])[0]
        if len(delta) != inst.n:
            return ["payment vector has the wrong length"]
        s = st.assignment
        if report.get("mode") == "direct":
            if any(d < 0 for d in delta):
                reasons.append("negative coordinator payment")
            reasons += _state_reasons(is_stable(st, delta))
        else:
            p = [[Fraction(0)] * inst.n for _ in range(inst.n)]
            for item in report.get("p", []):
                i, j, a = item["i"], item["j"], to_rat(item["amount"])
                p[i][j] += a
                p[j][i] -= a
            for i in range(inst.n):
                got = sum((p[j][i] for j in range(inst.n)), Fraction(0))
                if got != delta[i]:
                    reasons.append(f"{agent_label(i)} payment total does not match")
                for j in range(inst.n):
                    if abs(p[i][j]) > inst.dc[i][j]:
                        reasons.append(f"payment between {agent_label(i)} and {agent_label(j)} exceeds dc")
                    if p[i][j] != 0 and (s[i] is None or s[i] != s[j]):
                        reasons.append(f"{agent_label(i)} pays a peer on another facility")
            reasons += _state_reasons(is_stable(st, delta))
            if kind == "doubled":
                try:
                    dbl = Instance.from_dict(report["doubled_instance"])
                except (KeyError, InvalidInstance) as exc:
                    return reasons + [f"bad doubled instance: {exc}"]
                for i in range(inst.n):
                    for j in range(inst.n):
                        if dbl.dc[i][j] > 2 * inst.dc[i][j] or dbl.dc[i][j] < inst.dc[i][j]:
                            reasons.append(f"doubled weight out of range for ({i + 1},{j + 1})")
                if dbl.cc != inst.cc or dbl.fcost != inst.fcost:
                    reasons.append("doubled instance changes more than dc")
                reasons += [f"doubled: {r}" for r in _state_reasons(is_stable(State(dbl, s, st.prices)))]
    elif kind == "solution":
        method = report.get("method")
        if report.get("multi") or method in ("lp-det", "lp-rand"):
            s = tuple(frozenset(x) for x in report.get("assignment"))
            cost = multi.social_cost_multi(inst, s)
        else:
            s = dec_single(report.get("assignment"), inst)
            cost = social_cost(inst, s)
        if to_rat(report.get("cost")) != cost:
            reasons.append("reported cost does not match")
        if method in ("brute", "labeling-reduce"):
            try:
                _, opt = oracle.brute_force_optimum(inst, "multi" if report.get("multi") else "single")
            except SizeCapExceeded:
                opt = None
            if opt is not None and cost != opt:
                reasons.append("assignment is not optimal")
        if method in ("lp-det", "lp-rand"):
            rd = report["rounded"]
            x_ik = np.array(rd["x_ik"], dtype=np.int64)
            r = approx.complete(inst, x_ik, np.array(rd["x_ij"], dtype=np.int64))
            reasons += r.violations()
            if rat(r.objective) != rd["objective"]:
                reasons.append("rounded objective does not match")
            if r.assignment != s:
                reasons.append("assignment does not match rounded vector")
    elif kind == "analysis":
        fresh = analysis_report(inst)
        for key in ("pos", "poa", "delta", "opt_cost", "tradeoff_ok"):
            if report.get(key) != fresh[key]:
                reasons.append(f"{key} does not match")
    else:
        return [f"unknown report kind {kind!r}"]
    return reasons


def cmd_verify(args) -> dict:
    inst = load_instance(args.instance)
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_INVALID, "invalid_input", f"cannot read {args.report}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INVALID, "invalid_report", str(exc)) from None
    if not isinstance(report, dict):
        raise CliError(EXIT_INVALID, "invalid_report", "report must be a JSON object")
    try:
        reasons = verify_report(inst, report)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, SizeCapExceeded):
            raise
        reasons = [f"malformed report: {exc}"]
    if reasons:
        raise CliError(EXIT_VERIFY, "verification_failed", reasons[0], reasons)
    rep = base_report("verification", inst)
    rep.update({"ok": True, "checked": report.get("kind")})
    return rep


# ---- sweep --------------------------------------------------------------------

SWEEP_FIELDS = ["trial", "n", "m", "instance_hash", "opt_cost", "stable_cost", "ratio",
                "pos", "poa", "delta", "tradeoff_ok", "witness_ok"]


def sweep_trial(job):
    trial, seed_state, params = job
    rng = np.random.default_rng(seed_state)
    n = int(rng.integers(params["n"][0], params["n"][1] + 1))
    m = int(rng.integers(params["m"][0], params["m"][1] + 1))
    inst = generate.random_instance(n, m, rng, params["cc"], params["dc"], params["fcost"],
                                    params["density"], params["denominator"])
    r = oracle.analyze(inst)
    state, _ = stabilize(inst, r.optimum)
    cost = social_cost(inst, state.assignment)
    t = tradeoff_check(inst)
    ratio = cost / r.opt_cost if r.opt_cost else (Fraction(1) if cost == 0 else math.inf)
    return {"trial": trial, "n": n, "m": m, "instance_hash": inst.digest(),
            "opt_cost": rat(r.opt_cost), "stable_cost": rat(cost), "ratio": ratio_field(ratio),
            "pos": ratio_field(r.pos), "poa": ratio_field(r.poa), "delta": rat(t.delta),
            "tradeoff_ok": t.ok, "witness_ok": t.witness_ok}


def worker_limit(requested: int) -> int:
    cap = os.environ.get("IXPG_THREADS")
    jobs = max(1, requested)
    if cap:
        try:
            jobs = min(jobs, max(1, int(cap)))
        except ValueError:
            raise CliError(EXIT_INVALID, "invalid_params", "IXPG_THREADS must be an integer") from None
    return jobs


def cmd_sweep(args):
    if args.trials < 1:
        raise CliError(EXIT_INVALID, "invalid_params", "--trials must be positive")
    params = {"n": args.n_range, "m": args.m_range, "cc": args.cc_range, "dc": args.dc_range,
              "fcost": args.fcost_range, "density": args.density, "denominator": args.denominator}
    if (args.m_range[1] + 1) ** args.n_range[1] > oracle.LIMIT:
        raise CliError(EXIT_CAP, "size_cap_exceeded", "largest sweep size exceeds the oracle cap")
    children = np.random.SeedSequence(args.seed).spawn(args.trials)
    jobs = [(t, children[t], params) for t in range(args.trials)]
    workers = worker_limit(args.jobs)
    if workers == 1:
        rows = [sweep_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_trial, jobs))
    rows.sort(key=lambda r: r["trial"])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# ---- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ixpg", description="Facility group-formation game solver")
    sub = p.add_subparsers(dest="command", required=True)

    def out(sp):
        sp.add_argument("-o", "--out", default=None, help="output file (default stdout)")

    g = sub.add_parser("gen", help="write an instance")
    g.add_argument("--fixture", choices=generate.FIXTURES)
    g.add_argument("--eps", type=parse_rat, default=Fraction(1, 2))
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--cc-range", type=parse_range, default=(0, 10))
    g.add_argument("--dc-range", type=parse_range, default=(0, 5))
    g.add_argument("--fcost-range", type=parse_range, default=(0, 10))
    g.add_argument("--density", type=float, default=1.0)
    g.add_argument("--denominator", type=int, default=1)
    out(g)

    s = sub.add_parser("solve", help="optimum or approximate optimum")
    s.add_argument("instance")
    s.add_argument("--method", choices=["brute", "lp-det", "lp-rand", "labeling-reduce"], default="brute")
    s.add_argument("--multi", action="store_true")
    s.add_argument("--seed", type=int)
    out(s)

    st = sub.add_parser("stabilize", help="reach a stable state")
    st.add_argument("instance")
    st.add_argument("--alpha", type=parse_rat)
    st.add_argument("--multi", action="store_true")
    st.add_argument("--start", choices=["optimum", "empty"], default="optimum")
    st.add_argument("--trace", help="also write the trace as JSON lines to this file")
    out(st)

    pay = sub.add_parser("payments", help="stabilize the optimum with payments")
    pay.add_argument("instance")
    pay.add_argument("--mode", choices=["direct", "peering", "double"], default="direct")
    out(pay)

    a = sub.add_parser("analyze", help="PoS, PoA and the payment tradeoff")
    a.add_argument("instance")
    out(a)

    v = sub.add_parser("verify", help="re-check a report against its instance")
    v.add_argument("instance")
    v.add_argument("report")
    out(v)

    sw = sub.add_parser("sweep", help="random experiment matrix as CSV")
    sw.add_argument("--trials", type=int, default=20)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--seed", type=int, required=True)
    sw.add_argument("--n-range", type=parse_range, default=(2, 5))
    sw.add_argument("--m-range", type=parse_range, default=(1, 3))
    sw.add_argument("--cc-range", type=parse_range, default=(0, 10))
    sw.add_argument("--dc-range", type=parse_range, default=(0, 5))
    sw.add_argument("--fcost-range", type=parse_range, default=(0, 10))
    sw.add_argument("--density", type=float, default=1.0)
    sw.add_argument("--denominator", type=int, default=1)
    out(sw)
    return p


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "stabilize": cmd_stabilize,
            "payments": cmd_payments, "analyze": cmd_analyze, "verify": cmd_verify,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except CliError as exc:
        err = {"ok": False, "error": {"code": exc.kind, "message": str(exc), "reasons": exc.reasons}}
        sys.stdout.write(dump(err))
        return exc.code
    except SizeCapExceeded as exc:
        sys.stdout.write(dump({"ok": False, "error": {"code": "size_cap_exceeded", "message": str(exc),
                                                      "reasons": []}}))
        return EXIT_CAP
    except NotOptimalError as exc:
        sys.stdout.write(dump({"ok": False, "error": {"code": "verification_failed", "message": str(exc),
                                                      "reasons": [str(exc)]}}))
        return EXIT_VERIFY
    except (InvalidInstance, ValueError) as exc:
        sys.stdout.write(dump({"ok": False, "error": {"code": "invalid_input", "message": str(exc),
                                                      "reasons": []}}))
        return EXIT_INVALID
    write_out(result if isinstance(result, str) else dump(result), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
