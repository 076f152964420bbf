"""Command-line front end.

Every subcommand either takes its inputs from flags or from a JSON scenario
file (``--scenario``). Reports go to ``--out`` as ``<name>.json`` plus a CSV
summary with fixed columns. Exit status: 0 success, 2 audit violation or
failed bound, 1 bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

from . import adversary as adv
from . import repro
from .compression import compress_fully, compression_trace, three_candidate_spike_ratio
from .evaluation import EnumerationOverflow, approximation_ratio, optimal_candidate
from .geometry import Instance
from .mechanisms import LOCATION, MECHANISM_NAMES, RANKING, VOTING, Mechanism, get_mechanism
from .reductions import (check_reduction, claim2_map, lift, project_location_to_ranking,
                         project_location_to_voting_2cand)
from .truthfulness import (DEFAULT_GRID_STEP, SearchSpaceOverflow, audit_gsp,
                           audit_unilateral, audit_universal_wpv)

CSV_COLUMNS = ["scenario", "mechanism", "metric", "n", "m", "worst_cost", "opt_cost",
               "ratio", "bound", "pass"]
EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
TASKS = ("eval", "audit", "reduce", "lowerbound", "search", "compress")


class ScenarioError(ValueError):
    """Malformed scenario or unknown mechanism."""


def _num(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _row(scenario, mechanism, inst: Instance | None, worst="", opt="", ratio="", bound="",
         passed=True) -> dict:
    return {
        "scenario": scenario,
        "mechanism": mechanism,
        "metric": inst.metric.kind if inst is not None else "",
        "n": inst.n if inst is not None else "",
        "m": inst.m if inst is not None else "",
        "worst_cost": _num(worst),
        "opt_cost": _num(opt),
        "ratio": _num(ratio),
        "bound": _num(bound),
        "pass": _num(bool(passed)),
    }


def mechanism_from(spec: str) -> Mechanism:
    try:
        return get_mechanism(spec)
    except KeyError as exc:
        raise ScenarioError(str(exc.args[0])) from None


# ---------------------------------------------------------------------------
# instance sources


def instances_from(source: dict, seed: int) -> list[Instance]:
    """Instances named by a scenario: inline JSON or a generator."""
    if "instance" in source:
        return [Instance.from_dict(source["instance"])]
    if "instances" in source:
        return [Instance.from_dict(d) for d in source["instances"]]
    gen = source.get("generator")
    if gen is None:
        raise ScenarioError("scenario needs 'instance', 'instances' or 'generator'")
    name = gen.get("name")
    if name == "gap":
        pair = adv.gap_instance(float(gen.get("eps", 1e-3)))
        which = gen.get("profile", "both")
        return {"x": [pair[0]], "x'": [pair[1]], "both": list(pair)}[which]
    if name == "rd-worst":
        return [adv.rd_worst_instance(int(gen.get("n", 100)), float(gen.get("eps", 1e-3)))]
    if name == "gsp-fixture":
        return [Instance.on_line((-1, 0, 1), (-0.51, 0.51))]
    if name == "random-line":
        return repro.random_line_instances(int(gen.get("count", 100)), seed,
                                           int(gen.get("n_max", 8)), int(gen.get("m_max", 5)),
                                           float(gen.get("border_prob", 0.0)))
    if name == "grid":
        pts = gen.get("points", list(range(-4, 5)))
        return list(repro.grid_instances(pts, int(gen.get("n_max", 4)), int(gen.get("m_max", 4))))
    raise ScenarioError(f"unknown generator {name!r}")


# ---------------------------------------------------------------------------
# tasks; each returns (json report, csv rows, exit status)


def task_eval(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    bound = sc.get("bound")
    reports, rows = [], []
    status = EXIT_OK
    for spec in _mechanisms(sc):
        M = mechanism_from(spec)
        for inst in instances_from(sc, sc["seed"]):
            rep = approximation_ratio(M, inst)
            ok = bound is None or rep.ratio <= float(bound) + 1e-9
            status = max(status, EXIT_OK if ok else EXIT_FAIL)
            reports.append(rep.to_dict())
            rows.append(_row(name, M.name, inst, rep.worst_truthful_cost, rep.optimal_cost,
                             math.inf if rep.infinite else rep.ratio,
                             "" if bound is None else float(bound), ok))
    return {"reports": reports}, rows, status


def task_audit(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    kind = sc.get("audit", "unilateral")
    step = float(sc.get("grid_step", DEFAULT_GRID_STEP))
    box = sc.get("box")
    reports, rows = [], []
    status = EXIT_OK
    for spec in _mechanisms(sc):
        M = mechanism_from(spec)
        insts = instances_from(sc, sc["seed"])
        if kind == "universal-wpv":
            if not hasattr(M, "weights"):
                raise ScenarioError(f"{spec} is not a weighted percentile mechanism")
            reps = [(None, audit_universal_wpv(M.weights, insts))]
        elif kind == "gsp":
            reps = [(inst, audit_gsp(M, inst, sc.get("max_coalition"))) for inst in insts]
        elif kind == "unilateral":
            reps = [(inst, audit_unilateral(M, inst, grid_step=step,
                                            box=tuple(box) if box else None)) for inst in insts]
        else:
            raise ScenarioError(f"unknown audit kind {kind!r}")
        for inst, rep in reps:
            reports.append({"mechanism": M.name, **rep.to_dict()})
            if rep.passed:
                rows.append(_row(name, M.name, inst, passed=True))
            else:
                status = EXIT_FAIL
                # violation rows: cost under truthful reports, then cost after deviating
                for v in rep.violations:
                    rows.append(_row(name, M.name, v.instance, max(v.cost_before),
                                     max(v.cost_after), passed=False))
    return {"audits": reports}, rows, status


def task_reduce(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    M = mechanism_from(_mechanisms(sc)[0])
    to_kind = sc.get("to_kind", LOCATION)
    from_kind = sc.get("from_kind", M.input_kind)
    if from_kind != M.input_kind:
        raise ScenarioError(f"{M.name} takes {M.input_kind} input, not {from_kind}")
    insts = instances_from(sc, sc["seed"]) if _has_source(sc) else \
        repro.random_line_instances(int(sc.get("check_samples", 100)), sc["seed"], border_prob=0.2)
    if to_kind == from_kind:
        raise ScenarioError("source and target kinds coincide")
    order = {VOTING: 0, RANKING: 1, LOCATION: 2}
    if order[to_kind] > order[from_kind]:
        lifted = lift(M, to_kind)
        rep = check_reduction(lifted, M, insts)
        label = lifted.name
    elif from_kind == LOCATION and to_kind == RANKING:
        proj = project_location_to_ranking(M)
        rep = check_reduction(M, proj, insts, claim2_map(M))
        label = proj.name
    elif from_kind == LOCATION and to_kind == VOTING:
        two = [i for i in insts if i.m == 2]
        if not two:
            raise ScenarioError("location -> voting projection needs 2-candidate instances")
        rep = None
        for inst in two:
            proj = project_location_to_voting_2cand(M, inst.candidates)
            r = check_reduction(M, proj.mechanism, [inst], proj.consistent_map)
            rep = r if rep is None else rep.merge(r)
        label = f"project({M.name}, voting)"
    else:
        raise ScenarioError(f"no reduction from {from_kind} to {to_kind}")
    status = EXIT_OK if rep.passed else EXIT_FAIL
    rows = [_row(name, label, None, passed=rep.passed)]
    return {"reduction": label, **rep.to_dict()}, rows, status


def task_lowerbound(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    kind = sc.get("construction", "gap")
    eps = float(sc.get("eps", 1e-3))
    if kind == "simplex":
        M = mechanism_from(_mechanisms(sc, "random-dictator")[0])
        rep = adv.simplex_audit(M, int(sc.get("d", 2)))
    elif kind == "triangle":
        spec = _mechanisms(sc, "uniform:ranking")[0]
        M = mechanism_from(spec)
        rep = adv.triangle_audit(M)
    elif kind == "gap":
        M = mechanism_from(_mechanisms(sc, "median")[0])
        reps = [approximation_ratio(M, inst) for inst in adv.gap_instance(eps)]
        best = max(reps, key=lambda r: r.ratio)
        rep = adv.BoundReport(M.name, (3 - eps) / (1 + eps), best.ratio, best.instance,
                              best.witness_action_profile, direct_ratio=best.ratio)
    elif kind == "rd-worst":
        n = int(sc.get("n", 100))
        M = mechanism_from(_mechanisms(sc, "random-dictator")[0])
        r = approximation_ratio(M, adv.rd_worst_instance(n, eps))
        rep = adv.BoundReport(M.name, adv.rd_claimed_ratio(n, eps), r.ratio, r.instance,
                              r.witness_action_profile, direct_ratio=r.ratio,
                              extra={"exact_closed_form": adv.rd_exact_ratio(n, eps)})
    elif kind == "nonstrategic":
        p, v = adv.minimize_on_grid(lambda p: adv.nonstrategic_pair_bound(p, eps),
                                    float(sc.get("step", 1e-3)))
        _, exact = adv.minimize_on_grid(lambda p: max(adv.nonstrategic_pair_ratios(p, eps)),
                                        float(sc.get("step", 1e-3)))
        rep = adv.BoundReport("pair-lottery", 2 - eps / 2, v,
                              extra={"minimiser": p, "exact_pair_minimax": exact})
    else:
        raise ScenarioError(f"unknown construction {kind!r}")
    ok = abs(rep.achieved - rep.claimed_bound) <= float(sc.get("tolerance", 1e-9))
    inst = rep.witness
    rows = [_row(name, rep.mechanism, inst, ratio=rep.achieved, bound=rep.claimed_bound,
                 passed=ok)]
    return rep.to_dict(), rows, EXIT_OK if ok else EXIT_FAIL


def task_search(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    M = mechanism_from(_mechanisms(sc)[0])
    cfg = adv.SearchConfig(
        count=int(sc.get("samples", 1000)),
        n_range=tuple(sc.get("n_range", (1, 16))),
        m_range=tuple(sc.get("m_range", (1, 6))),
        coord_range=tuple(sc.get("coord_range", (-10.0, 10.0))),
        seed=sc["seed"],
        metric=sc.get("metric", "line"),
        probe_transforms=bool(sc.get("probe_transforms", True)),
        gap_eps=tuple(sc.get("gap_eps", ())),
        workers=int(sc.get("workers", 1)),
    )
    rep = adv.ratio_search(M, cfg)
    bound = sc.get("bound")
    if rep.extra.get("skipped"):
        return rep.to_dict(), [_row(name, M.name, None, ratio="skipped", passed=True)], EXIT_OK
    ok = bound is None or rep.achieved <= float(bound) + 1e-9
    w = rep.witness
    opt = optimal_candidate(w)[1]
    rows = [_row(name, M.name, w, rep.achieved * opt if opt > 0 else "", opt, rep.achieved,
                 "" if bound is None else float(bound), ok)]
    return rep.to_dict(), rows, EXIT_OK if ok else EXIT_FAIL


def task_compress(sc: dict) -> tuple[dict, list[dict], int]:
    name = sc["name"]
    out, rows = [], []
    for inst in instances_from(sc, sc["seed"]):
        if not inst.metric.is_line:
            raise ScenarioError("compression needs a line instance")
        trace = compression_trace(inst)
        red = compress_fully(inst)
        ratio = three_candidate_spike_ratio(red)
        out.append({"instance": inst.to_dict(), "trace": [g.to_dict() for g in trace],
                    "reduction": red.to_dict(), "three_candidate_spike_ratio": ratio})
        costs = red.costs()
        rows.append(_row(name, "spike", inst, ratio * costs[1], costs[1], ratio, 2.0,
                         ratio <= 2 + 1e-9))
    return {"compressions": out}, rows, EXIT_OK


TASK_FUNCS = {
    "eval": task_eval, "audit": task_audit, "reduce": task_reduce,
    "lowerbound": task_lowerbound, "search": task_search, "compress": task_compress,
}


def _has_source(sc: dict) -> bool:
    return any(k in sc for k in ("instance", "instances", "generator"))


def _mechanisms(sc: dict, default: str | None = None) -> list[str]:
    if "mechanisms" in sc:
        mechs = sc["mechanisms"]
    elif "mechanism" in sc:
        mechs = [sc["mechanism"]]
    elif default is not None:
        mechs = [default]
    else:
        raise ScenarioError("scenario names no mechanism")
    if not mechs or not all(isinstance(m, str) for m in mechs):
        raise ScenarioError("mechanisms must be registry names")
    return mechs


def normalize_scenario(data: Any, seed: int | None = None) -> dict:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    sc = dict(data)
    sc.setdefault("name", "scenario")
    if sc.get("task") not in TASKS:
        raise ScenarioError(f"scenario task must be one of {TASKS}")
    if seed is not None:
        sc["seed"] = seed
    sc["seed"] = int(sc.get("seed", 0))
    if not 0 <= sc["seed"] < 2**64:
        raise ScenarioError("seed must be a 64-bit unsigned integer")
    return sc


def execute(sc: dict, out_dir: Path | None, stream=None) -> int:
    """Run a normalised scenario, write its reports and return the exit status."""
    report, rows, status = TASK_FUNCS[sc["task"]](sc)
    report = {"scenario": sc["name"], "task": sc["task"], "seed": sc["seed"], **report}
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{sc['name']}.json").write_text(text + "\n")
        (out_dir / f"{sc['name']}.csv").write_text(buf.getvalue())
    stream = sys.stdout if stream is None else stream
    stream.write(buf.getvalue())
    return status


def _json_default(o):
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def run_scenario(path, out_dir=None, seed: int | None = None, stream=None) -> int:
    """Load a scenario file and run it. Returns the process exit status."""
    err = sys.stderr
    try:
        data = json.loads(Path(path).read_text())
        sc = normalize_scenario(data, seed)
        return execute(sc, Path(out_dir) if out_dir else None, stream)
    except (OSError, json.JSONDecodeError, ScenarioError, ValueError, KeyError, TypeError,
            EnumerationOverflow, SearchSpaceOverflow) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT


# ---------------------------------------------------------------------------
# argument parsing


def _load_instance_arg(arg: str | None) -> dict:
    if arg is None:
        return {}
    p = Path(arg)
    data = json.loads(p.read_text()) if p.exists() else json.loads(arg)
    return {"instance": data}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="candsel", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file (overrides other inputs)")
    common.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
    common.add_argument("--out", help="directory for the JSON and CSV reports")
    common.add_argument("--name", default=None, help="report name (default: subcommand)")
    sub = parser.add_subparsers(dest="command", required=True)

    mech_help = "mechanism: " + ", ".join(MECHANISM_NAMES)
    p = sub.add_parser("eval", parents=[common], help="worst truthful ratio on instances")
    p.add_argument("--mech", action="append", help=mech_help)
    p.add_argument("--instance", help="instance JSON file or literal")
    p.add_argument("--gap-eps", type=float, help="use the two-agent gap instance pair")
    p.add_argument("--bound", type=float)

    p = sub.add_parser("audit", parents=[common], help="incentive audits")
    p.add_argument("--mech", action="append", help=mech_help)
    p.add_argument("--instance", help="instance JSON file or literal")
    p.add_argument("--kind", choices=["unilateral", "gsp", "universal-wpv"], default="unilateral")
    p.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
    p.add_argument("--max-coalition", type=int)

    p = sub.add_parser("reduce", parents=[common], help="check a reduction between action kinds")
    p.add_argument("--mech", help=mech_help)
    p.add_argument("--from-kind", choices=[VOTING, RANKING, LOCATION])
    p.add_argument("--to-kind", choices=[VOTING, RANKING, LOCATION], default=LOCATION)
    p.add_argument("--check-samples", type=int, default=100)

    p = sub.add_parser("lowerbound", parents=[common], help="lower-bound constructions")
    p.add_argument("construction", nargs="?", default="gap",
                   choices=["gap", "rd-worst", "simplex", "triangle", "nonstrategic"])
    p.add_argument("--mech", help=mech_help)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=2)

    p = sub.add_parser("search", parents=[common], help="random worst-case ratio search")
    p.add_argument("--mech", help=mech_help)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--metric", choices=["line", "explicit"], default="line")
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--gap-eps", type=float, action="append")
    p.add_argument("--no-probes", action="store_true", help="skip tight/compressed probes")
    p.add_argument("--bound", type=float)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("compress", parents=[common], help="compression trace of a line instance")
    p.add_argument("--instance", help="instance JSON file or literal")

    p = sub.add_parser("repro-all", help="run every claim and print a summary table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None,
                   help="override the random-search sample counts")
    p.add_argument("--out", help="directory for repro.csv")
    return parser


def scenario_from_args(args) -> dict:
    cmd = args.command
    sc: dict = {"task": cmd, "name": args.name or cmd}
    if cmd == "eval":
        sc["mechanisms"] = args.mech or ["spike"]
        if args.gap_eps is not None:
            sc["generator"] = {"name": "gap", "eps": args.gap_eps}
        sc.update(_load_instance_arg(args.instance))
        if args.bound is not None:
            sc["bound"] = args.bound
    elif cmd == "audit":
        sc["mechanisms"] = args.mech or ["spike"]
        sc["audit"] = args.kind
        sc["grid_step"] = args.grid_step
        if args.max_coalition is not None:
            sc["max_coalition"] = args.max_coalition
        sc.update(_load_instance_arg(args.instance))
        if not _has_source(sc):
            sc["generator"] = {"name": "gsp-fixture"} if args.kind == "gsp" else \
                {"name": "grid", "points": [-2, -1, 0, 1, 2], "n_max": 3, "m_max": 3}
    elif cmd == "reduce":
        sc["mechanism"] = args.mech or "median"
        if args.from_kind:
            sc["from_kind"] = args.from_kind
        sc["to_kind"] = args.to_kind
        sc["check_samples"] = args.check_samples
    elif cmd == "lowerbound":
        sc["construction"] = args.construction
        if args.mech:
            sc["mechanism"] = args.mech
        sc.update({"eps": args.eps, "n": args.n, "d": args.d})
        if args.construction == "nonstrategic":
            sc["tolerance"] = 1e-6
        if args.construction in ("simplex", "triangle"):
            sc["tolerance"] = 1e-12
    elif cmd == "search":
        sc["mechanism"] = args.mech or "spike"
        sc.update({"samples": args.samples, "metric": args.metric,
                   "n_range": [1, args.n_max], "m_range": [1, args.m_max],
                   "probe_transforms": not args.no_probes, "workers": args.workers})
        if args.gap_eps:
            sc["gap_eps"] = args.gap_eps
        if args.bound is not None:
            sc["bound"] = args.bound
    elif cmd == "compress":
        sc.update(_load_instance_arg(args.instance))
        if not _has_source(sc):
            raise ScenarioError("compress needs --instance")
    return sc


def cmd_repro_all(args) -> int:
    rows = repro.repro_all(samples=args.samples, seed=args.seed)
    width = max(len(r.claim) for r in rows)
    print(f"{'claim':<{width}}  {'bound':>16}  {'achieved':>22}  result")
    for r in rows:
        print(f"{r.claim:<{width}}  {repro._fmt(r.bound):>16}  {repro._fmt(r.achieved):>22}  "
              f"{'pass' if r.passed else 'FAIL'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "repro.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["claim", "bound", "achieved", "pass"])
            for r in rows:
                w.writerow([r.claim, repro._fmt(r.bound), repro._fmt(r.achieved),
                            str(r.passed).lower()])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "repro-all":
        return cmd_repro_all(args)
    if args.scenario:
        return run_scenario(args.scenario, args.out, args.seed)
    try:
        sc = normalize_scenario(scenario_from_args(args), args.seed)
        return execute(sc, Path(args.out) if args.out else None)
    except (OSError, json.JSONDecodeError, ScenarioError, ValueError, KeyError, TypeError,
            EnumerationOverflow, SearchSpaceOverflow) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
