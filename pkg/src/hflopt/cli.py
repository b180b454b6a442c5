"""Command-line entry point: ``hflopt {generate,sroa,tsia,sweep,hfl-sim}``.

Exit codes: 0 on success, 2 when a solver reports an infeasible instance,
1 on usage or I/O errors (including schema mismatches).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .cost import cost_report_csv
from .errors import HFLError
from .hfl_sim import TASK_KINDS, loss_csv, make_tasks, run_fedavg, run_hfl
from .scenario import (
    SCENARIO_UNITS,
    assignment_from_dict,
    dumps,
    generate_scenario,
    geo_initial_assignment,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .sroa import SolverConfig, sroa
from .tsia import tsia

log = logging.getLogger("hflopt")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
RESULT_VERSION = 1
RESULT_UNITS = {**SCENARIO_UNITS, "objective": "J", "t": "s", "e": "J", "b": "Hz", "f": "Hz", "p": "W"}
SWEEP_COLUMNS = ["lambda", "feasible", "R", "E_sum", "T_sum"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _override(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_solver_flags(p):
    p.add_argument("--scenario", required=True, help="scenario JSON document")
    p.add_argument("--tol", type=float, help="set eps0..eps3 at once")
    for i in range(4):
        p.add_argument(f"--eps{i}", type=float)
    p.add_argument("--max-iters", type=int, help="iteration cap per solver loop")
    p.add_argument("--method", choices=("price", "shared"))
    p.add_argument("--search-rule", choices=("descent", "literal"))
    p.add_argument("--t-bounds", type=float, nargs=2, metavar=("LOW", "UP"),
                   help="explicit deadline bracket in seconds instead of the analytic one")
    p.add_argument("--out-dir", default=".")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hflopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="draw a random scenario")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--users", type=int, default=50)
    g.add_argument("--edges", type=int, default=5)
    g.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                   metavar="KEY=VALUE", help="generator override, VALUE parsed as JSON")
    g.add_argument("--out", help="output file (default OUT_DIR/scenario.json)")
    g.add_argument("--out-dir", default=".")

    s = sub.add_parser("sroa", help="optimise resources for one assignment")
    _add_solver_flags(s)
    s.add_argument("--assignment", help="assignment JSON (default: nearest edge)")
    s.add_argument("--lambda", dest="lam", type=_positive_float, help="override the importance weight")

    t = sub.add_parser("tsia", help="search user assignments")
    _add_solver_flags(t)
    t.add_argument("--lambda", dest="lam", type=_positive_float)
    t.add_argument("--tsia-iters", type=int, default=500, help="move cap per stage")

    w = sub.add_parser("sweep", help="trade-off curve over the importance weight")
    _add_solver_flags(w)
    w.add_argument("--lambda", dest="lambdas", type=_positive_float, action="append", default=[])
    w.add_argument("--solver", choices=("sroa", "tsia"), default="sroa")
    w.add_argument("--jobs", type=int, default=1)

    h = sub.add_parser("hfl-sim", help="hierarchical averaging on synthetic tasks")
    h.add_argument("--scenario", help="take sample counts, I/K/L and the nearest-edge assignment from here")
    h.add_argument("--seed", type=int, default=1)
    h.add_argument("--users", type=int, default=10)
    h.add_argument("--edges", type=int, default=2)
    h.add_argument("--global-iters", type=int)
    h.add_argument("--edge-iters", type=int)
    h.add_argument("--local-iters", type=int)
    h.add_argument("--dim", type=int, default=8)
    h.add_argument("--lr", type=_positive_float, default=0.005)
    h.add_argument("--task", choices=TASK_KINDS, default="least_squares")
    h.add_argument("--reference", action="store_true", help="also write the flat FedAvg curve")
    h.add_argument("--out-dir", default=".")
    return parser


def solver_config(args) -> SolverConfig:
    kw = {}
    if args.tol is not None:
        kw.update({f"eps{i}": args.tol for i in range(4)})
    for i in range(4):
        v = getattr(args, f"eps{i}")
        if v is not None:
            kw[f"eps{i}"] = v
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    if args.method:
        kw["method"] = args.method
    if args.search_rule:
        kw["search_rule"] = args.search_rule
    if args.t_bounds:
        kw.update(t_bounds_policy="explicit", t_low=args.t_bounds[0], t_up=args.t_bounds[1])
    return SolverConfig(**kw)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _result_doc(kind: str, cfg: SolverConfig, scenario, body: dict) -> dict:
    return {
        "schema": f"hflopt.{kind}_result",
        "version": RESULT_VERSION,
        "units": RESULT_UNITS,
        "solver": cfg.to_dict(),
        "importance_weight": scenario.params.importance_weight,
        **body,
    }


def cmd_generate(args) -> int:
    sc = generate_scenario(args.seed, args.users, args.edges, dict(args.overrides))
    path = Path(args.out) if args.out else Path(args.out_dir) / "scenario.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, path)
    return EXIT_OK


def _load(args, lam=None):
    sc = load_scenario(args.scenario)
    if lam is not None:
        sc = sc.with_params(importance_weight=lam)
    return sc


def cmd_sroa(args) -> int:
    cfg = solver_config(args)
    sc = _load(args, args.lam)
    if args.assignment:
        with open(args.assignment, encoding="utf-8") as fh:
            psi = assignment_from_dict(json.load(fh))
    else:
        psi = geo_initial_assignment(sc)
    res = sroa(sc, psi, cfg)
    out = Path(args.out_dir)
    doc = _result_doc("sroa", cfg, sc, {"assignment": [list(g) for g in psi.groups], **res.to_dict()})
    _write(out / "sroa_result.json", dumps(doc))
    if not res.feasible:
        return EXIT_INFEASIBLE
    _write(out / "sroa_cost.csv", cost_report_csv(res.report, psi, res.allocation))
    return EXIT_OK


def cmd_tsia(args) -> int:
    cfg = solver_config(args)
    sc = _load(args, args.lam)
    res = tsia(sc, cfg, max_iters=args.tsia_iters)
    out = Path(args.out_dir)
    _write(out / "tsia_result.json", dumps(_result_doc("tsia", cfg, sc, res.to_dict())))
    _write(out / "tsia_trace.csv", res.trace.to_csv())
    if not res.feasible:
        return EXIT_INFEASIBLE
    _write(out / "tsia_cost.csv", cost_report_csv(res.result.report, res.assignment, res.allocation))
    return EXIT_OK


def _sweep_point(job):
    doc, lam, cfg, solver = job
    sc = scenario_from_dict(doc).with_params(importance_weight=lam)
    res = sroa(sc, geo_initial_assignment(sc), cfg) if solver == "sroa" else tsia(sc, cfg).result
    if not res.feasible:
        return [repr(lam), "0", "", "", ""]
    r = res.report
    return [repr(lam), "1", repr(r.objective), repr(r.e_sum), repr(r.t_sum)]


def cmd_sweep(args) -> int:
    if not args.lambdas:
        raise UsageError("sweep needs at least one --lambda")
    cfg = solver_config(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    doc = scenario_to_dict(load_scenario(args.scenario))
    lambdas = sorted(set(args.lambdas))
    jobs = [(doc, lam, cfg, args.solver) for lam in lambdas]
    if args.jobs == 1 or len(jobs) == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(jobs))) as pool:
            rows = list(pool.map(_sweep_point, jobs))  # map preserves lambda order
    text = ",".join(SWEEP_COLUMNS) + "\n" + "".join(",".join(r) + "\n" for r in rows)
    _write(Path(args.out_dir) / "sweep.csv", text)
    return EXIT_INFEASIBLE if any(r[1] == "0" for r in rows) else EXIT_OK


def cmd_hfl_sim(args) -> int:
    if args.scenario:
        sc = load_scenario(args.scenario)
    else:
        sc = generate_scenario(args.seed, args.users, args.edges)
    prm = sc.params
    I = args.global_iters or prm.global_iters
    K = args.edge_iters or prm.edge_iters
    L = args.local_iters or prm.local_iters
    tasks = make_tasks(args.seed, sc.samples.tolist(), dim=args.dim, kind=args.task, lr=args.lr)
    psi = geo_initial_assignment(sc)
    out = Path(args.out_dir)
    _write(out / "hfl_loss.csv", run_hfl(tasks, psi, I, K, L).to_csv())
    if args.reference:
        # flat FedAvg with the same number of local steps, sampled once per K rounds
        flat = run_fedavg(tasks, I * K, L)
        _write(out / "fedavg_loss.csv", loss_csv(flat.losses[K - 1 :: K]))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sroa": cmd_sroa,
    "tsia": cmd_tsia,
    "sweep": cmd_sweep,
    "hfl-sim": cmd_hfl_sim,
}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            defaults = json.load(fh)
        if not isinstance(defaults, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"hflopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError) as exc:
        print(f"hflopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, HFLError, OSError, json.JSONDecodeError) as exc:
        print(f"hflopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
