"""Command-line front end: seeded experiments that write JSON reports.

Usage: ``expander-fp <group> <command> [options]``, for example::

    expander-fp chain gap --graph c5.txt
    expander-fp rgm meanwalk --family cycle:5 --q 2 --j 1 --k 2
    expander-fp fp iterate --space '{"kind": "euclidean", "dim": 2}' --value '[1, 0]'

Every report embeds the configuration, the library version and a
timestamp; apart from the timestamp a report is a deterministic function
of the configuration. Failed inequality checks are listed under
``violations`` and do not change the exit code.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from fractions import Fraction
from typing import Any

import numpy as np

from . import __version__
from . import barycenter as bc
from . import embedding as em
from . import fixed_point as fp
from . import graphs as gr
from . import markov as mk
from . import poincare as pc
from . import random_group as rg
from .spaces import Euclidean, encode_point, space_from_descriptor

COMMANDS = {
    "graph": ("gen", "girth", "distdist"),
    "chain": ("gap", "convolve"),
    "poincare": ("estimate", "matousek"),
    "barycenter": ("solve", "growth"),
    "embed": ("decompose", "snowflake", "distortion", "theta"),
    "rgm": ("label", "walk", "meanwalk", "effsim", "azuma", "relators"),
    "fp": ("energy", "iterate", "suite", "contraction", "transfer"),
}


def _jsonable(x: Any):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# -- input helpers ----------------------------------------------------------------------------------


def _graph(args) -> gr.UndirectedGraph:
    if args.graph:
        return gr.UndirectedGraph.read(args.graph)
    if args.family:
        name, _, arg = args.family.partition(":")
        if name == "cycle":
            return gr.cycle_graph(int(arg))
        if name == "complete":
            return gr.complete_graph(int(arg))
        if name == "path":
            return gr.path_graph(int(arg))
        if name == "petersen":
            return gr.petersen_graph()
        if name == "regular":
            n, d = (int(t) for t in arg.split(","))
            return gr.gen_random_regular(n, d, args.seed)
        raise SystemExit(f"unknown graph family {name!r}")
    raise SystemExit("this command needs --graph <edge-list> or --family")


def _space(args):
    return space_from_descriptor(args.space) if args.space else Euclidean(1)


def _points(args) -> np.ndarray:
    if args.points:
        return em.read_points_csv(args.points)
    if args.grid:
        return em.grid_points(args.grid)
    raise SystemExit("this command needs --points <csv> or --grid <side>")


def _value(args, space):
    if args.value is None:
        raise SystemExit("this command needs --value <json point>")
    v = json.loads(args.value)
    if space.kind == "tree":
        return space.validate(tuple(v))
    return space.validate(v)


def _action(args):
    if args.action:
        return fp.action_from_descriptor(json.loads(args.action))
    space = space_from_descriptor(args.space) if args.space else Euclidean(2)
    return fp.dihedral_action(space, 3)


def _labeling(args, g):
    if args.labels:
        with open(args.labels) as fh:
            return rg.Labeling.from_json(g, fh.read())
    return rg.sample_labeling(g, args.k, args.j, args.seed)


# -- commands -----------------------------------------------------------------------------------------


def _graph_cmd(cmd, args):
    if cmd == "gen":
        g = gr.gen_random_regular(args.n, args.d, args.seed)
        return {"n": g.n, "edges": [list(e) for e in g.edges], "girth": gr.girth(g),
                "edge_list": g.to_edge_list()}, []
    g = _graph(args)
    if cmd == "girth":
        return {"girth": gr.girth(g)}, []
    dd = gr.distance_distribution(g, args.q, exact=args.exact)
    return {"q": args.q, "distribution": {str(k): v for k, v in sorted(dd.items())}}, []


def _chain_cmd(cmd, args):
    c = mk.standard_walk(_graph(args))
    if cmd == "gap":
        rep = mk.spectral_gap(c, args.method)
        return {"sigma": rep.gap, "lambda2": rep.second_largest_eigenvalue, "method": rep.method}, []
    cn = mk.convolve(c, args.n)
    return {"n": args.n, "kernel": cn.kernel, "stationary": cn.stationary}, []


def _poincare_cmd(cmd, args):
    if cmd == "matousek":
        return {"bound": pc.matousek_bound(args.modulus, args.p, args.q, args.branch)}, []
    chain = mk.standard_walk(_graph(args))
    est = pc.modulus_estimate(chain, _space(args), args.p, restarts=args.samples or pc.DEFAULT_RESTARTS,
                              seed=args.seed)
    out = est.to_dict()
    violations = []
    if est.space["kind"] == "euclidean" and est.space.get("dim", 1) == 1 and args.p >= 2:
        bound = pc.real_modulus_upper_bound(est.sigma, args.p)
        out["upper_bound"] = bound
        if est.lam > bound + 1e-6:
            violations.append("modulus above the extrapolated bound")
    return out, violations


def _barycenter_cmd(cmd, args):
    space = _space(args) if args.space else Euclidean(_points(args).shape[1])
    pts = list(_points(args))
    if space.kind == "tree":
        pts = [space.validate(tuple(p)) for p in pts]
    weights = json.loads(args.weights) if args.weights else None
    sigma = bc.FiniteMeasure.normalized(pts, weights)
    if cmd == "solve":
        res = bc.p_center(space, sigma, args.p, tol=args.tol, seed=args.seed)
        return {"center": encode_point(res.center), "moment": res.moment, "iterations": res.iterations,
                "converged": res.converged, "method": res.method}, []
    rep = bc.growth_check(space, sigma, args.p, args.samples or 10_000, args.seed)
    viol = [] if rep.min_slack >= -1e-9 else ["growth inequality slack below -1e-9"]
    return {"min_slack": rep.min_slack, "center": encode_point(rep.center), "min_moment": rep.min_moment,
            "samples": rep.samples, "c_y": rep.c_y}, viol


def _scheme(args, pts):
    return em.shifted_grid_scheme(pts)


def _embed_cmd(cmd, args):
    if cmd == "theta":
        theta = em.optimize_theta(args.eps, args.delta, args.p, args.sigma)
        return {"theta": theta, "bound": em.theta_bound(theta, args.eps, args.delta, args.p, args.sigma),
                "asymptotic_theta": em.asymptotic_theta(args.sigma)}, []
    pts = _points(args)
    scheme = _scheme(args, pts)
    if cmd == "decompose":
        scale = args.scale or 4.0
        rep = scheme.certify(scale, args.samples or 2000, args.seed)
        labels = scheme.sample(scale, np.random.default_rng(args.seed))
        viol = [] if rep.passed else ["padding probability below delta - 3 stderr"]
        return {"scale": scale, "labels": labels, "eps": scheme.eps, "delta": scheme.delta,
                "worst_margin": rep.worst_margin, "min_fraction": float(rep.fractions.min())}, viol
    emb = em.snowflake_embed(scheme, args.theta, samples=args.samples or 1000, seed=args.seed, workers=args.workers)
    if cmd == "snowflake":
        out = emb.to_dict()
        viol = [] if em.check_cases_bound(emb) <= 1e-12 else ["coordinate bound violated"]
        return out, viol
    rep = em.distortion(scheme.dist, emb.vectors, args.theta, scheme.eps, scheme.delta)
    rows = em.check_lower_bound(emb)
    viol = [] if all(r.ok for r in rows) else ["lower bound fails for some pair"]
    return {"expansion": rep.expansion, "contraction": rep.contraction, "distortion": rep.distortion,
            "theory": rep.theory, "fitted_constant": rep.fitted_constant}, viol


def _rgm_cmd(cmd, args):
    if cmd == "azuma":
        return rg.azuma_failure_bound(args.d, args.k, args.j, args.q, args.n, args.edges), []
    g = _graph(args)
    if cmd == "meanwalk":
        mw = rg.mean_walk(g, args.q, args.j, args.k, exact=args.exact)
        return {"weights": {str(k): v for k, v in sorted(mw.weights.items())},
                "distribution": {rg.word_to_str(w) or "e": m for w, m in sorted(mw.items())}}, []
    alpha = _labeling(args, g)
    if cmd == "label":
        return json.loads(alpha.to_json()), []
    if cmd == "relators":
        return {"relators": [rg.word_to_str(w) for w in rg.relators(alpha, g)]}, []
    if cmd == "walk":
        dist = rg.simulate_walk(alpha, args.q)
        return {"distribution": {rg.word_to_str(w) or "e": m for w, m in sorted(dist.items())}}, []
    rep = rg.effective_simulation_check(alpha, args.q)
    return rep.to_dict(), ([] if rep.ok else ["effective simulation fails"])


def _fp_cmd(cmd, args):
    if cmd == "transfer":
        g = _graph(args)
        alpha = _labeling(args, g)
        action = _action(args)
        hom = json.loads(args.hom) if args.hom else [action.S[0], action.S[-1]][:alpha.k]
        try:
            rep = fp.transfer_experiment(g, alpha, action, hom, _value(args, action.space), args.p,
                                         q0=args.q, require_simulation=not args.allow_failed_simulation,
                                         restarts=args.samples or 8, seed=args.seed)
        except (fp.PrerequisiteError, ValueError) as exc:
            raise SystemExit(f"transfer: {exc}")
        return rep.to_dict(), []
    action = _action(args)
    y0 = _value(args, action.space)
    if cmd == "energy":
        mu = fp.measure_power(action, fp.step_measure(action), args.n)
        return fp.energy_report(action, y0, mu, args.p).to_dict(), []
    if cmd == "iterate":
        res = fp.iterate_to_fixed_point(action, y0, args.n, args.p, tol=args.tol or 1e-14,
                                        max_iter=args.max_iter)
        return res.to_dict(), ([] if res.converged else [res.reason])
    if cmd == "suite":
        rep = fp.energy_inequality_suite(action, y0, args.p, args.n)
        return rep.to_dict(), rep.violations
    rep = fp.contraction_report(action, y0, args.p, range(1, args.n + 1))
    return rep.to_dict(), []


HANDLERS = {"graph": _graph_cmd, "chain": _chain_cmd, "poincare": _poincare_cmd, "barycenter": _barycenter_cmd,
            "embed": _embed_cmd, "rgm": _rgm_cmd, "fp": _fp_cmd}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expander-fp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="report path (default: stdout)")
    common.add_argument("--graph", help="edge-list file")
    common.add_argument("--family", help="built-in graph: cycle:N, complete:N, path:N, petersen, regular:N,D")
    common.add_argument("--points", help="CSV of point coordinates")
    common.add_argument("--grid", type=int, help="use the side x side planar grid as the point set")
    common.add_argument("--space", help="space descriptor as JSON")
    common.add_argument("--action", help="group action descriptor as JSON (default D3 on --space)")
    common.add_argument("--value", help="basepoint value as JSON")
    common.add_argument("--labels", help="labeling JSON file")
    common.add_argument("--hom", help="JSON list: group element index for each free generator")
    common.add_argument("--weights", help="JSON list of measure weights")
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--q", type=int, default=2)
    common.add_argument("--j", type=int, default=2)
    common.add_argument("--k", type=int, default=2)
    common.add_argument("--n", type=int, default=1)
    common.add_argument("--d", type=int, default=3)
    common.add_argument("--edges", type=int, default=0, help="edge count for the azuma bound")
    common.add_argument("--theta", type=float, default=0.5)
    common.add_argument("--eps", type=float, default=0.25)
    common.add_argument("--delta", type=float, default=0.5)
    common.add_argument("--sigma", type=float, default=0.5)
    common.add_argument("--modulus", type=float, default=1.0)
    common.add_argument("--branch", choices=("upper", "lower"))
    common.add_argument("--scale", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int, default=200)
    common.add_argument("--method", default="auto")
    common.add_argument("--exact", action="store_true")
    common.add_argument("--allow-failed-simulation", action="store_true")
    groups = parser.add_subparsers(dest="group", required=True)
    for group, cmds in COMMANDS.items():
        gp = groups.add_parser(group)
        sub = gp.add_subparsers(dest="command", required=True)
        for cmd in cmds:
            sub.add_parser(cmd, parents=[common])
    return parser


def run(args: argparse.Namespace) -> dict:
    """Execute one parsed command and return the full report."""
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    result, violations = HANDLERS[args.group](args.command, args)
    return _jsonable({
        "command": f"{args.group} {args.command}",
        "config": config,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "result": result,
        "violations": violations,
    })


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.group == "fp" and args.command == "transfer" and args.j % 2:
        raise SystemExit("transfer needs an even j: S^j must contain S^2 for the walk to stay connected")
    try:
        report = run(args)
    except (ValueError, RuntimeError, OSError) as exc:
        raise SystemExit(f"expander-fp {args.group} {args.command}: {exc}")
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
