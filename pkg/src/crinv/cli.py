"""crtool: command line front end.

Every command prints one report with the fields command, inputs, bounds,
results and flags.  Exit codes: 0 ok, 1 analysis negative, 2 usage or parse
error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .exactalg import ZERO, GaussianRational, I, Poly, WeightVector
from .finitetype import hormander
from .geometry import ManifoldSpec, PointError, PointQ, RealityError, classify_point
from .homogeneous import (
    HomogeneityError,
    check_homogeneous,
    condition_231,
    degenerate_selfmap,
    nonalgebraic_selfmap,
    real_witness,
)
from .mapcheck import ESeries, Var, algebraic_dependence, leaf_chart, map_rank, verify_map
from .dsl import ParseError, parse_leaf, parse_manifold, parse_map, parse_point
from .nondegen import degeneracy_witness, essentially_finite, nondeg_report
from .normalform import solve_normal
from .segre import implicitize, segre_dims

DEFAULTS = {"order": 8, "exp_order": 10, "length_max": 8, "deg_bound": 4, "alpha_bound": 6}


class UsageError(ValueError):
    pass


def jsonable(x):
    """Exact JSON form: rationals as "p/q", Gaussian rationals as {"re", "im"}."""
    if isinstance(x, GaussianRational):
        return x.to_json()
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        raise TypeError("floating point value in a report")
    if isinstance(x, Poly):
        return str(x)
    if hasattr(x, "to_json"):
        return jsonable(x.to_json())
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return x


def corpus_path(name: str) -> Path:
    return Path(str(resources.files("crinv") / "corpus" / name))


def resolve(path: str) -> Path:
    """A file path, or the name of a bundled corpus file (with or without corpus/)."""
    p = Path(path)
    if p.exists():
        return p
    q = corpus_path(p.name)
    if q.exists():
        return q
    for ext in (".crm", ".map"):
        q = corpus_path(p.name + ext)
        if q.exists():
            return q
    raise UsageError(f"no such file: {path}")


def load_manifold(path: str) -> ManifoldSpec:
    return parse_manifold(resolve(path).read_text())


class Run:
    """State shared by the commands of one invocation."""

    def __init__(self, args):
        self.args = args
        self.spec = load_manifold(args.file)
        self.seed = args.seed
        self.bounds = {}
        self.timings = {}
        self._models = {}
        point = getattr(args, "point", None)
        self.point = parse_point(point, self.spec.N) if point else self.spec.basepoint or PointQ((ZERO,) * self.spec.N)

    def rng(self) -> random.Random:
        return random.Random(self.seed)

    def order(self, key="order") -> int:
        k = self.args.order if self.args.order is not None else DEFAULTS[key]
        self.bounds[key] = k
        return k

    def model(self):
        k = self.order()
        if k not in self._models:
            self._models[k] = solve_normal(self.spec, self.point, k)
        return self._models[k]

    def timed(self, name, fn):
        t = time.perf_counter()
        out = fn()
        self.timings[name] = f"{time.perf_counter() - t:.3f}s"
        return out


# ---------------------------------------------------------------------------
# commands; each returns (results, negative)


def cmd_classify(run: Run):
    pc = classify_point(run.spec, run.point, rng=run.rng())
    return pc.to_json(), not pc.generic


def cmd_segre(run: Run):
    m = run.model()
    chain = segre_dims(m, run.rng())
    out = {"n": m.n, "d": m.d, "N": m.N, "model": m.kind, **chain.to_json()}
    if getattr(run.args, "implicitize", False):
        eqs = {}
        for j in range(1, chain.j0 + 1):
            res = implicitize(m, j)
            eqs[str(j)] = res if isinstance(res, str) else [f"{e} = 0" for e in res]
        out["implicit"] = eqs
    return out, False


def cmd_hormander(run: Run):
    L = getattr(run.args, "length_max", None) or DEFAULTS["length_max"]
    run.bounds["length_max"] = L
    rep = hormander(run.model(), None, L, run.rng())
    return rep.to_json(), False


def _nondeg_bounds(run: Run):
    D = getattr(run.args, "deg_bound", None) or DEFAULTS["deg_bound"]
    A = getattr(run.args, "alpha_bound", None) or DEFAULTS["alpha_bound"]
    run.bounds.update(deg_bound=D, alpha_bound=A)
    return D, A


def cmd_nondegen(run: Run):
    D, A = _nondeg_bounds(run)
    rep = nondeg_report(run.model(), None, D=D, A=A, rng=run.rng())
    return rep.to_json(), rep.witness is not None


def cmd_essfinite(run: Run):
    _, A = _nondeg_bounds(run)
    ef = essentially_finite(run.model(), A)
    return {"verdict": ef.verdict, "reason": ef.reason}, ef.verdict != "yes"


def _homogeneous(run: Run):
    """The weighted homogeneous model at the base point, if the file declares weights and it applies."""
    if run.spec.weights is None:
        return None, "no weights declared"
    try:
        return check_homogeneous(run.model(), WeightVector(run.spec.weights.weights)), ""
    except (HomogeneityError, ValueError) as e:
        return None, str(e)


def find_witness(run: Run):
    hm, why = _homogeneous(run)
    if hm is not None:
        h = real_witness(hm, length_max=DEFAULTS["length_max"])
        return h, {"method": "homogeneous", "condition": {str(k): v for k, v in condition_231(hm).items()}}
    h = real_witness(run.spec, point=run.point, order=run.order())
    return h, {"method": "ansatz", "homogeneous": why}


def cmd_witness(run: Run):
    h, info = find_witness(run)
    out = {"h": h if isinstance(h, Poly) else None, "minimal": h == "minimal", **info}
    return out, not isinstance(h, Poly)


def _twist_candidates(spec: ManifoldSpec):
    if spec.weights is not None:
        yield tuple(spec.weights.weights), 1
    # Rotations first, then real dilations of a single coordinate.
    for s in (I, 1):
        for k in range(spec.N):
            yield tuple(int(j == k) for j in range(spec.N)), s


def cmd_selfmap(run: Run):
    K = run.order("exp_order")
    spec = run.spec.with_basepoint(run.point)
    pc = classify_point(spec, run.point, rng=run.rng())
    if not pc.generic:
        try:
            dm = degenerate_selfmap(spec)
            return {"construction": "hyperplane", **dm.to_json()}, False
        except ValueError as e:
            return {"construction": None, "reason": str(e)}, True
    D, A = _nondeg_bounds(run)
    m = run.model()
    X = degeneracy_witness(m, D, A)
    if X is not None and m.order is None:
        dm = degenerate_selfmap(m, X, order=K)
        return {"construction": "flow", "witness": X.to_json(), **dm.to_json()}, False
    h, info = find_witness(run)
    if not isinstance(h, Poly):
        return {"construction": None, "reason": "minimal" if h == "minimal" else "no real witness within bounds"}, True
    tried = []
    for factors, s in _twist_candidates(spec):
        try:
            tw = nonalgebraic_selfmap(spec, h.with_vars(h.vars), factors=factors, multiplier=s, order=K)
        except ValueError as e:
            tried.append({"factors": list(factors), "multiplier": str(s), "failure": str(e)})
            continue
        return {"construction": "twist", **info, **tw.to_json(), "rejected": tried}, False
    return {"construction": None, "h": h, "rejected": tried}, True


def cmd_check_map(run: Run):
    K = run.order("exp_order")
    H = parse_map(resolve(run.args.map).read_text(), run.spec)
    chk = verify_map(H, run.spec, order=K)
    out = {"map": H.to_json(), **chk.to_json()}
    if chk.ok:
        out["rank"] = map_rank(H, order=min(K, DEFAULTS["order"]), rng=run.rng())
    return out, not chk.ok


def cmd_depend(run: Run):
    K = run.order("exp_order")
    run.bounds.update(order=K, deg_x=run.args.deg_x, deg_u=run.args.deg_u)
    spec = run.spec
    H = parse_map(resolve(run.args.map).read_text(), spec)
    k = run.args.component
    if not 1 <= k <= H.target_dim:
        raise UsageError(f"component must be between 1 and {H.target_dim}")
    comp = H.components[k - 1]
    out = {"component": str(comp)}
    if run.args.leaf:
        hs, cs = parse_leaf(run.args.leaf, spec.coords)
        center = list(run.point.coords) if run.args.point else list(H.base().coords)
        if not run.args.point:
            # For a coordinate leaf move the center onto it.
            for h, c in zip(hs, cs):
                if isinstance(h, Var):
                    center[spec.coords.index(h.name)] = c
        leaf = leaf_chart(spec, hs, cs, PointQ(tuple(center)), order=K)
        env = {v: ESeries.of(leaf.chart[v]) for v in spec.coords}
        u = leaf.free
        out["leaf"] = leaf.to_json()
    else:
        base = dict(zip(spec.coords, H.base().coords))
        env = {v: ESeries.of(Poly.var(v, spec.coords) + base[v]) for v in spec.coords}
        u = spec.coords
    f = comp.evaluate(env, K, u)
    cert = algebraic_dependence(f, u, run.args.deg_u, run.args.deg_x, K)
    out["certificate"] = None if cert is None else cert.to_json()
    return out, cert is None


def cmd_report(run: Run):
    out = {}
    negative = {}
    for name, fn in (
        ("classify", cmd_classify),
        ("segre", cmd_segre),
        ("hormander", cmd_hormander),
        ("nondegen", cmd_nondegen),
        ("witness", cmd_witness),
    ):
        res, neg = run.timed(name, lambda fn=fn: fn(run))
        out[name] = res
        negative[name] = neg
    seg, typ = out["segre"], out["hormander"]
    out["checks"] = {
        "orbit_dim_is_n_plus_r": seg["orbit_dim"] == seg["n"] + typ["r"],
        "minimal_agrees": seg["minimal"] == typ["minimal"],
    }
    out["negative"] = negative
    return out, False


COMMANDS = {
    "classify": cmd_classify,
    "segre": cmd_segre,
    "hormander": cmd_hormander,
    "nondegen": cmd_nondegen,
    "essfinite": cmd_essfinite,
    "witness": cmd_witness,
    "selfmap": cmd_selfmap,
    "check-map": cmd_check_map,
    "depend": cmd_depend,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--order", type=int, default=None, help="series order (default 8; 10 for exp checks)")
    common.add_argument("--seed", type=int, default=0, help="seed for all random sampling")
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument("--timings", action="store_true", help="add wall-clock timings (not reproducible)")
    common.add_argument("--point", default=None, help="base point, comma separated (default: file point or 0)")

    ap = argparse.ArgumentParser(prog="crtool", description="Invariants of real algebraic CR submanifolds.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("file", help="manifold file (.crm) or corpus name")
        return p

    add("classify", "regular / CR / generic at the point")
    add("segre", "Segre set dimensions").add_argument("--implicitize", action="store_true")
    add("hormander", "Hörmander numbers and minimality").add_argument("--length-max", type=int, default=None)
    p = add("nondegen", "k-nondegeneracy, Levi number, degeneracy witness")
    p.add_argument("--deg-bound", type=int, default=None)
    p.add_argument("--alpha-bound", type=int, default=None)
    add("essfinite", "essential finiteness at the point").add_argument("--alpha-bound", type=int, default=None)
    add("witness", "holomorphic polynomial that is real on M")
    add("selfmap", "nonalgebraic self-map construction")
    p = add("check-map", "verify that a map sends M into M")
    p.add_argument("--map", required=True)
    p = add("depend", "algebraic dependence of one map component")
    p.add_argument("--map", required=True)
    p.add_argument("--component", type=int, required=True, help="1-based component index")
    p.add_argument("--deg-x", type=int, default=2)
    p.add_argument("--deg-u", type=int, default=2)
    p.add_argument("--leaf", default=None, help="restrict to h = c, e.g. 'w3 = 1/2'")
    add("report", "classify, segre, hormander, nondegen and witness together")
    return ap


def _text(report: dict) -> str:
    lines = [f"{report['command']}: {report['inputs']['name']}"]
    for k, v in report["results"].items():
        lines.append(f"  {k}: {json.dumps(v, sort_keys=True)}")
    return "\n".join(lines)


def emit(report: dict, as_json: bool, stream=None):
    stream = stream or sys.stdout
    if as_json:
        stream.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        stream.write(_text(report) + "\n")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    as_json = args.json
    try:
        run = Run(args)
        results, negative = COMMANDS[args.command](run)
    except (ParseError, RealityError, PointError, UsageError) as e:
        kind = "parse" if isinstance(e, (ParseError, RealityError)) else "usage"
        err = e.to_json() if isinstance(e, ParseError) else {"error": kind, "message": str(e)}
        sys.stdout.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    except (ValueError, ArithmeticError) as e:
        sys.stdout.write(json.dumps({"error": "analysis", "message": str(e)}, sort_keys=True) + "\n")
        return 1
    report = {
        "command": args.command,
        "inputs": {"file": args.file, "name": run.spec.name, "point": run.point},
        "bounds": run.bounds,
        "results": results,
        "flags": {"seed": args.seed, "negative": negative},
    }
    if args.timings:
        report["timings"] = run.timings
    emit(jsonable(report), as_json)
    return 1 if negative else 0


if __name__ == "__main__":
    sys.exit(main())
