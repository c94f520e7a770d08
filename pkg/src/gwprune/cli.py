"""Command-line frontend.

Every command first writes a JSON header line ``{"gwprune": version, "command",
"seed", "dist", "backend"}`` and then its output, one record per line. With
``--pretty`` the header becomes a ``#`` comment and numbers are rounded.

Seeds: ``--seed``, else ``$GWPRUNE_SEED``, else ``DEFAULT_SEED``. Monte Carlo
output is produced in chunks of 4096 samples; chunk ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))``, so ``--threads`` never changes the
output.

Exit codes: 0 ok, 1 a verification failed, 2 usage or domain error, 3 numeric
failure or exhausted sampling budget.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._accel import backend_name
from ._rng import run_chunked
from .batch import TreeBatch
from .errors import (
    DegenerateError,
    DomainError,
    GWPruneError,
    NumericError,
    ParseError,
    ResourceError,
    TruncatedError,
)
from .offspring import conjugate, extinction_probability, parse_distribution

DEFAULT_SEED = 12345
SEED_MAX = 2**64 - 1


class UsageError(GWPruneError):
    pass


def _dist(text: str):
    try:
        return parse_distribution(text)
    except (ParseError, DomainError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` -> ``[a, a+step, ..., b]`` (``b`` included when it lies on the lattice)."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs step > 0 and a <= b")
    n = int(np.floor((b - a) / step + 1e-9))
    pts = [round(a + i * step, 12) for i in range(n + 1)]
    if b - pts[-1] > 1e-9:
        pts.append(b)
    return pts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gwprune", description="Pruned Galton-Watson tree processes.")
    p.add_argument("--version", action="version", version=f"gwprune {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None)
    common.add_argument("--pretty", action="store_true")
    common.add_argument("--format", choices=("paren", "json"), default="paren")

    def dist(sp, required=True):
        sp.add_argument("--dist", type=_dist, required=required,
                        help="finite:[p0,p1,...] or geometric:beta or geometric:alpha,beta")

    def budget(sp):
        sp.add_argument("--height", type=_positive, default=None, help="height cap")
        sp.add_argument("--max-nodes", type=_positive, default=None, help="node cap")

    def mc(sp, n_default=1):
        sp.add_argument("--n", type=_positive, default=n_default)
        sp.add_argument("--threads", type=_positive, default=1)

    sp = sub.add_parser("sample", parents=[common], help="GW(p^(u)) trees, or modified trees with --alpha/--beta")
    dist(sp)
    sp.add_argument("--u", type=float, default=1.0)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta", type=float)
    budget(sp)
    mc(sp)

    sp = sub.add_parser("prune", parents=[common], help="node-prune trees read from stdin")
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--n", type=_positive, default=1, help="prunings per input tree")

    sp = sub.add_parser("law", parents=[common], help="exact law table over small trees")
    dist(sp)
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--max-nodes", type=_positive, default=7)
    sp.add_argument("--mode", choices=("gw", "gstar"), default="gw")

    for name, helptext in (("extinction", "F(u)"), ("conjugate", "u_hat = u F(u)")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        dist(sp)
        sp.add_argument("--u", type=float, required=True)

    sp = sub.add_parser("ascension", parents=[common], help="ascension times, paths or pre-ascension trees")
    dist(sp)
    sp.add_argument("--mode", choices=("time", "path", "pretree"), default="time")
    sp.add_argument("--grid", type=parse_grid, help="a:b:step (mode path)")
    sp.add_argument("--u", type=float, help="ascension time a (mode pretree)")
    budget(sp)
    mc(sp)

    sp = sub.add_parser("kesten", parents=[common], help="height-h restrictions of the Kesten tree")
    dist(sp)
    sp.add_argument("--height", type=int, required=True)
    mc(sp)

    sp = sub.add_parser("gstar", parents=[common], help="pruned Kesten tree G*(u)")
    dist(sp)
    sp.add_argument("--u", type=float, required=True)
    mc(sp)

    sp = sub.add_parser("enumerate", parents=[common], help="all small ordered trees")
    sp.add_argument("--max-nodes", type=_positive, required=True)
    sp.add_argument("--max-arity", type=int, default=None)

    sp = sub.add_parser("verify", parents=[common], help="run a named acceptance suite")
    dist(sp, required=False)
    sp.add_argument("--suite", required=True)
    sp.add_argument("--n", type=_positive, default=100_000)
    sp.add_argument("--threads", type=_positive, default=1)
    return p


class Output:
    def __init__(self, args, stream):
        self.args = args
        self.stream = stream

    def header(self, seed):
        d = getattr(self.args, "dist", None)
        rec = {
            "gwprune": __version__,
            "command": self.args.command,
            "seed": seed,
            "dist": d.literal() if d is not None else None,
            "backend": backend_name(),
        }
        if self.args.pretty:
            self.line("# " + " ".join(f"{k}={v}" for k, v in rec.items()))
        else:
            self.line(json.dumps(rec))

    def line(self, text: str):
        self.stream.write(text + "\n")

    def number(self, x: float):
        self.line(f"{x:.10g}" if self.args.pretty else repr(float(x)))

    def tree(self, t, truncated: bool = False):
        body = t.to_json() if self.args.format == "json" else t.serialize()
        self.line(("TRUNCATED " if truncated else "") + body)

    def batch(self, b: TreeBatch):
        for i in range(len(b)):
            self.tree(b.tree(i), bool(b.truncated[i]))


def _budget(args):
    from .prune import SampleBudget

    return SampleBudget(getattr(args, "height", None), getattr(args, "max_nodes", None))


def _chunked_batch(fn, args, seed) -> TreeBatch:
    parts = run_chunked(fn, args.n, seed, args.threads)
    out = parts[0]
    for b in parts[1:]:
        out = out.concat(b)
    return out


def _read_trees(args, stream):
    from .tree import parse, parse_json

    reader = parse_json if args.format == "json" else parse
    for raw in stream:
        raw = raw.strip()
        if raw and not raw.startswith("#"):
            yield reader(raw)


def execute(args, seed: int, out: Output, stdin=None) -> int:
    cmd = args.command
    out.header(seed)
    if cmd == "extinction":
        out.number(extinction_probability(args.dist, args.u))
    elif cmd == "conjugate":
        out.number(conjugate(args.dist, args.u))
    elif cmd == "sample":
        from .prune import sample_gw_many, sample_modified_gw_many

        budget = _budget(args)
        if (args.alpha is None) != (args.beta is None):
            raise UsageError("--alpha and --beta go together")
        if args.alpha is not None:
            fn = lambda c, r: sample_modified_gw_many(args.dist, args.alpha, args.beta, c, budget, r)
        else:
            fn = lambda c, r: sample_gw_many(args.dist, args.u, c, budget, r)
        out.batch(_chunked_batch(fn, args, seed))
    elif cmd == "prune":
        from .prune import prune_many

        rng = np.random.default_rng(seed)
        for t in _read_trees(args, stdin or sys.stdin):
            out.batch(prune_many(t, args.u, args.n, rng))
    elif cmd == "law":
        from .kesten import gstar_probability
        from .oracle import enumerate_trees, exact_law_table, law_table_from

        if args.mode == "gw":
            table = exact_law_table(args.dist, args.u, args.max_nodes)
        else:
            table = law_table_from(lambda t: gstar_probability(args.dist, args.u, t),
                                   enumerate_trees(args.max_nodes), args.max_nodes)
        from .tree import parse

        keys = sorted(table.entries, key=lambda k: (parse(k).num_nodes, k))
        for k in keys:
            p = table.entries[k]
            if args.pretty:
                out.line(f"{p:.10f}  {k}")
            else:
                out.line(json.dumps({"tree": k, "probability": p}))
        if args.pretty:
            out.line(f"# covered mass {table.covered_mass:.10f} over trees with <= {table.bound} nodes")
        else:
            out.line(json.dumps({"covered_mass": table.covered_mass, "bound": table.bound}))
    elif cmd == "ascension":
        return _ascension(args, seed, out)
    elif cmd == "kesten":
        from .kesten import SpinedTree, sample_kesten_many

        if args.height < 0:
            raise DomainError("--height must be >= 0")
        parts = run_chunked(lambda c, r: sample_kesten_many(args.dist, args.height, c, r), args.n, seed, args.threads)
        for batch, spines in parts:
            for i in range(len(batch)):
                out.line(SpinedTree(batch.tree(i), tuple(spines[i])).serialize())
    elif cmd == "gstar":
        from .kesten import sample_gstar_many

        out.batch(_chunked_batch(lambda c, r: sample_gstar_many(args.dist, args.u, c, r), args, seed))
    elif cmd == "enumerate":
        from .oracle import enumerate_trees

        for t in enumerate_trees(args.max_nodes, args.max_arity):
            out.tree(t)
    elif cmd == "verify":
        from .verify import run_suite

        try:
            reports = run_suite(args.suite, args.dist, seed, args.n)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        for r in reports:
            out.line(r.line() if args.pretty else r.to_json())
        return 0 if all(r.passed for r in reports) else 1
    return 0


def _ascension(args, seed, out: Output) -> int:
    from .ascension import INF, sample_ascension_times, sample_pre_ascension_trees, simulate_ascension_paths

    d = args.dist
    if args.mode == "time":
        parts = run_chunked(lambda c, r: sample_ascension_times(d, c, r), args.n, seed, args.threads)
        for a in np.concatenate(parts):
            out.number(a)
    elif args.mode == "pretree":
        if args.u is None:
            raise UsageError("--mode pretree needs --u (the ascension time a)")
        out.batch(_chunked_batch(lambda c, r: sample_pre_ascension_trees(d, args.u, c, r), args, seed))
    else:
        if args.grid is None:
            raise UsageError("--mode path needs --grid a:b:step")
        budget = _budget(args)
        parts = run_chunked(lambda c, r: simulate_ascension_paths(d, args.grid, c, budget, r), args.n, seed, args.threads)
        j = 0
        for part in parts:
            for k in range(len(part)):
                path = part.path(k)
                for u, s in zip(path.grid, path.states):
                    state = s.serialize() if s is INF or args.format == "paren" else s.to_nested()
                    out.line(json.dumps({"path": j, "u": u, "state": state}))
                j += 1
    return 0


def main(argv: Optional[Sequence[str]] = None, stdout=None, stdin=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    seed = args.seed
    if seed is None:
        env = os.environ.get("GWPRUNE_SEED")
        if env:
            try:
                seed = _seed(env)
            except argparse.ArgumentTypeError as exc:
                print(f"gwprune: GWPRUNE_SEED: {exc}", file=sys.stderr)
                return 2
        else:
            seed = DEFAULT_SEED
    try:
        return execute(args, seed, Output(args, stdout), stdin)
    except (UsageError, ParseError, DomainError, DegenerateError, ResourceError) as exc:
        print(f"gwprune: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, TruncatedError, OverflowError, FloatingPointError) as exc:
        print(f"gwprune: numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
