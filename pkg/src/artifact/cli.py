"""Command-line front end: JSON output with a run manifest on every call."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import platform
import re
import sys
import time
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import __version__
from .algebra import change_tree, product, recoupling_matrix
from .coupling import CouplingTree, QuasicharId, _to_text, all_quasichar_ids, enumerate_labels, multiplicity
from .exactnum import ExactError, HalfInt, LabelError, SqrtRational, SqrtSum, halfint_parse
from .hamiltonian import (
    CapacityError,
    HamiltonianParams,
    UnsupportedLatticeError,
    assemble,
    lattice_by_name,
    lattice_from_json,
    spectrum,
    wilson_overlap_oracle,
    word_expansion,
)
from .quasichar import FitError, fit_trace_polynomial, quasichar_eval
from .rep import make_rng, su2_sample
from .wigner import bracket_9j, clebsch_gordan, wigner_6j, wigner_9j

__all__ = ["main", "build_parser", "parse_label"]

SCHEMA = "artifact/1"
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        # magnetic numbers such as -1/2 are positional values, not flags
        self._negative_number_matcher = re.compile(r"^-\d+(/\d+)?$|^-\d*\.\d+$")

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# parsing helpers


def _spin(text: str) -> HalfInt:
    return halfint_parse(text)


def _signed(text: str) -> HalfInt:
    return halfint_parse(text, signed=True)


def _spin_list(text: str) -> list[HalfInt]:
    text = text.strip()
    if not text:
        return []
    return [_spin(x) for x in text.split(",")]


def parse_label(text: str, tree: str | None = None) -> QuasicharId:
    """Label "LEAVES:TOTAL[:K[:K']]", e.g. "1/2,1/2,1/2:1/2:1" (comma-separated spin lists)."""
    parts = text.split(":")
    if not 2 <= len(parts) <= 4:
        raise ExactError(f"label {text!r} is not LEAVES:TOTAL[:K[:K']]")
    leaves = _spin_list(parts[0])
    total = _spin(parts[1])
    k = _spin_list(parts[2]) if len(parts) > 2 else []
    k2 = _spin_list(parts[3]) if len(parts) > 3 else None
    t = CouplingTree.parse(tree, len(leaves)) if tree else CouplingTree.caterpillar(len(leaves))
    return QuasicharId(t, leaves, k, k2, total)


def _exact(value: SqrtRational | SqrtSum) -> dict:
    return {"exact": str(value), "approx": float(value), "decimal": f"{float(value):.15g}"}


def _complex(z: complex) -> Any:
    z = complex(z)
    if abs(z.imag) <= 1e-13 * max(1.0, abs(z.real)):
        return z.real
    return {"re": z.real, "im": z.imag}


# ---------------------------------------------------------------------------
# subcommands


def cmd_wigner(args: argparse.Namespace) -> tuple[dict, dict]:
    kind = args.symbol
    need = {"cg": 6, "6j": 6, "9j": 9, "bracket9j": 9}[kind]
    if len(args.spins) != need:
        raise ExactError(f"{kind} takes {need} arguments, got {len(args.spins)}")
    if kind == "cg":
        j1, m1, j2, m2, j, m = args.spins
        vals = [_spin(j1), _signed(m1), _spin(j2), _signed(m2), _spin(j), _signed(m)]
        value = clebsch_gordan(*vals)
    else:
        vals = [_spin(x) for x in args.spins]
        value = {"6j": wigner_6j, "9j": wigner_9j, "bracket9j": bracket_9j}[kind](*vals)
    out = {"symbol": kind, "args": [v.to_json() for v in vals], **_exact(value)}
    return out, {"phase": "condon-shortley"}


def cmd_labels(args: argparse.Namespace) -> tuple[dict, dict]:
    leaves = _spin_list(args.leaves)
    tree = CouplingTree.parse(args.tree, len(leaves)) if args.tree else CouplingTree.caterpillar(len(leaves))
    totals = [_spin(args.total)] if args.total is not None else None
    if totals is None:
        ids = all_quasichar_ids(tree, leaves)
        totals = sorted({q.total for q in ids}, key=lambda h: h.twice)
    out = []
    for j in totals:
        seqs = enumerate_labels(tree, leaves, j)
        if not seqs:
            raise LabelError(f"total spin {j} does not occur in the product of the leaf spins")
        out.append({
            "total": j.to_json(),
            "multiplicity": multiplicity(leaves, j, tree),
            "internal": [[s.to_json() for s in seq] for seq in seqs],
        })
    return {"tree": str(tree), "internal_nodes": [_to_text(x) for x in tree.internal_nodes],
            "leaves": [s.to_json() for s in leaves], "totals": out}, {}


def cmd_quasichar(args: argparse.Namespace) -> tuple[dict, dict]:
    qid = parse_label(args.label, args.tree)
    if args.action == "eval":
        rng = make_rng(args.seed)
        points = args.samples or args.points
        us = su2_sample(rng, (points, qid.n))
        vals = quasichar_eval(qid, us, args.convention, args.method)
        ident = quasichar_eval(qid, np.broadcast_to(np.eye(2), (qid.n, 2, 2)), args.convention, args.method)
        out = {
            "id": qid.to_json(),
            "identity": _complex(ident),
            "points": [
                {"elements": [[[_complex(x) for x in row] for row in u] for u in us[i]], "value": _complex(vals[i])}
                for i in range(points)
            ],
        }
        return out, {"convention": args.convention, "method": args.method}
    poly = fit_trace_polynomial(qid, rng=args.seed, mode=args.mode, resolve=args.resolve,
                                convention=args.convention, residual_tol=args.tolerance)
    out = {"id": qid.to_json(), "polynomial": poly.to_str(), "coefficients": poly.to_json(),
           "fit": {k: v for k, v in poly.meta.items()}}
    return out, {"convention": args.convention, "basis": args.mode, "resolve": args.resolve}


def cmd_product(args: argparse.Namespace) -> tuple[dict, dict]:
    a = parse_label(args.left, args.tree)
    b = parse_label(args.right, args.tree)
    exp = product(a, b, args.convention)
    out = {"left": a.to_json(), "right": b.to_json(), "expansion": exp.to_json()}
    if args.action == "verify":
        rng = make_rng(args.seed)
        points = args.samples or args.points
        us = su2_sample(rng, (points, a.n))
        lhs = quasichar_eval(a, us, args.convention) * quasichar_eval(b, us, args.convention)
        rhs = exp.evaluate(us)
        resid = float(np.max(np.abs(lhs - rhs)))
        out["verify"] = {"points": points, "max_residual": resid, "tolerance": args.tolerance,
                         "passed": resid <= args.tolerance}
    return out, {"convention": args.convention, "tree_out": "caterpillar"}


def cmd_recouple(args: argparse.Namespace) -> tuple[dict, dict]:
    leaves = _spin_list(args.leaves)
    t_from = CouplingTree.parse(args.source, len(leaves))
    t_to = CouplingTree.parse(args.target, len(leaves))
    mat = recoupling_matrix(t_from, t_to, leaves, _spin(args.total))
    out = {"matrix": mat.to_json(), "orthogonal": mat.is_orthogonal()}
    if args.label:
        out["change_tree"] = change_tree(parse_label(args.label, args.source), t_to).to_json()
    return out, {"phase": "condon-shortley"}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_hamiltonian(args: argparse.Namespace) -> tuple[dict, dict]:
    cfg = _load_config(args.config)
    lattice_cfg = args.lattice or cfg.get("lattice", "single-plaquette")
    if isinstance(lattice_cfg, dict):
        lattice = lattice_from_json(lattice_cfg)
    elif lattice_cfg.endswith(".json"):
        with open(lattice_cfg, encoding="utf-8") as fh:
            lattice = lattice_from_json(json.load(fh))
    else:
        lattice = lattice_by_name(lattice_cfg)
    g = args.g if args.g is not None else float(cfg.get("g", 1.0))
    delta = args.delta if args.delta is not None else float(cfg.get("delta", 1.0))
    jmax = _spin(args.jmax) if args.jmax is not None else _spin(str(cfg.get("jmax", "1")))
    k = args.k if args.k is not None else int(cfg.get("k", 5))
    cap = args.casimir_cap if args.casimir_cap is not None else cfg.get("casimir_cap")
    cap = None if cap is None else Fraction(str(cap))
    kinetic = args.kinetic_normalization or cfg.get("kinetic_normalization", "hamiltonian")
    params = HamiltonianParams(g=g, delta=delta, jmax=jmax, casimir_cap=cap, kinetic=kinetic)
    asm = assemble(lattice, params)
    scale = 0.0 if args.no_wilson else 1.0
    h = asm.matrix(wilson_scale=scale)
    vals, vecs, resid = spectrum(h, k)
    norm = float(np.linalg.norm(h, 2)) if h.size else 0.0
    out = {
        "lattice": lattice.name,
        "basis_size": asm.dim,
        "eigenvalues": vals.tolist(),
        "residuals": resid.tolist(),
        "matrix_norm": norm,
        "residual_ok": bool(np.all(resid <= 1e-9 * max(norm, 1.0))),
        "wilson_terms": len(asm.wilson),
        "truncation": {"jmax": jmax.to_json(), "casimir_cap": None if cap is None else str(cap)},
        "exactly_symmetric": asm.is_exactly_symmetric(),
        "meta": asm.meta,
    }
    if args.sweep:
        rows = []
        for gv in args.sweep:
            p = HamiltonianParams(g=gv, delta=delta, jmax=jmax, casimir_cap=cap, kinetic=kinetic)
            a2 = type(asm)(asm.basis, asm.casimir, asm.coupling, p, asm.wilson, asm.meta)
            ev = spectrum(a2.matrix(wilson_scale=scale), k)[0]
            rows.append([gv] + ev.tolist())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["g"] + [f"lambda{i}" for i in range(k)])
        w.writerows(rows)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(buf.getvalue())
        out["sweep"] = rows
    conv = {"kinetic_normalization": kinetic,
            "kinetic_factor": params.kinetic_factor,
            "magnetic_factor": params.magnetic_factor,
            "basis": "orthonormal caterpillar quasicharacters",
            "wilson": "disabled" if args.no_wilson else "enabled"}
    return out, conv


def cmd_verify(args: argparse.Namespace) -> tuple[dict, dict]:
    if args.check == "orthonormality":
        jmax = _spin(args.jmax)
        ids = []
        tree = CouplingTree.caterpillar(args.N)
        for leaves in itertools.product(range(jmax.twice + 1), repeat=args.N):
            ids.extend(all_quasichar_ids(tree, [HalfInt(x) for x in leaves]))
        samples = args.samples or 100000
        rng = make_rng(args.seed)
        us = su2_sample(rng, (samples, args.N))
        vals = np.stack([quasichar_eval(q, us, "orthonormal") for q in ids])
        gram = (vals.conj() @ vals.T) / samples
        sq = (np.abs(vals) ** 2)
        second = (sq @ sq.T) / samples
        var = np.maximum(second - np.abs(gram) ** 2, 0.0)
        stderr = np.sqrt(var / (samples - 1))
        target = np.eye(len(ids))
        dev = np.abs(gram - target)
        z = np.where(stderr > 0, dev / np.where(stderr > 0, stderr, 1.0), np.where(dev > 1e-12, np.inf, 0.0))
        worst = np.unravel_index(int(np.argmax(z)), z.shape)
        out = {
            "basis_size": len(ids),
            "samples": samples,
            "max_sigma": float(z.max()),
            "max_abs_deviation": float(dev.max()),
            "worst_pair": [ids[worst[0]].to_json(), ids[worst[1]].to_json()],
            "within_3_sigma": bool(z.max() <= 3.0),
        }
        return out, {"convention": "orthonormal", "measure": "haar-monte-carlo"}
    if args.check == "wilson":
        words = {"T_r": ((1, 1),), "T_rs": ((1, 1), (2, 1)), "T_rstu": ((1, 1), (2, 1), (3, 1), (4, 1))}
        out = {}
        for name, word in words.items():
            terms = []
            ok = True
            for qid, c in word_expansion(word):
                o = wilson_overlap_oracle(word, qid)
                ok &= o == c
                terms.append({"id": qid.to_json(), **_exact(c), "oracle": str(o)})
            out[name] = {"terms": terms, "oracle_agrees": ok}
        return out, {"convention": "orthonormal"}
    raise ExactError(f"unknown check {args.check!r}")


# ---------------------------------------------------------------------------
# parser and dispatch


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None

    def default(v):
        return argparse.SUPPRESS if suppress else v

    parser.add_argument("--pretty", action="store_true", default=default(False), help="human-readable output")
    parser.add_argument("--out", default=d, help="write output to this file")
    parser.add_argument("--seed", type=int, default=default(0), help="random seed")
    parser.add_argument("--samples", type=int, default=d, help="Monte Carlo sample count")
    parser.add_argument("--tolerance", type=float, default=default(1e-9), help="numerical tolerance")
    parser.add_argument("--timing", action="store_true", default=default(False), help="record wall time")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _globals(common, suppress=True)
    p = _Parser(prog="artifact", description="SU(2) quasicharacters, recoupling and lattice Hamiltonians")
    _globals(p, suppress=False)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("wigner", parents=[common], help="exact CG, 6j, 9j symbols")
    w.add_argument("symbol", choices=["cg", "6j", "9j", "bracket9j"])
    w.add_argument("spins", nargs="+")
    w.set_defaults(func=cmd_wigner)

    lab = sub.add_parser("labels", parents=[common], help="admissible internal labels of a coupling tree")
    lab.add_argument("leaves", help="comma-separated leaf spins")
    lab.add_argument("total", nargs="?", default=None)
    lab.add_argument("--tree", default=None)
    lab.set_defaults(func=cmd_labels)

    q = sub.add_parser("quasichar", parents=[common], help="evaluate or fit a quasicharacter")
    q.add_argument("action", choices=["eval", "fit"])
    q.add_argument("label", help="LEAVES:TOTAL[:K[:K']]")
    q.add_argument("--tree", default=None)
    q.add_argument("--convention", choices=["trace", "orthonormal", "table"], default="trace")
    q.add_argument("--method", choices=["cg", "projector"], default="cg")
    q.add_argument("--points", type=int, default=3)
    q.add_argument("--mode", choices=["generator", "table"], default="generator")
    q.add_argument("--resolve", choices=["min-norm", "pivot"], default="min-norm")
    q.set_defaults(func=cmd_quasichar)

    pr = sub.add_parser("product", parents=[common], help="pointwise product expansion")
    pr.add_argument("action", choices=["expand", "verify"])
    pr.add_argument("left")
    pr.add_argument("right")
    pr.add_argument("--tree", default=None)
    pr.add_argument("--convention", choices=["trace", "orthonormal"], default="trace")
    pr.add_argument("--points", type=int, default=20)
    pr.set_defaults(func=cmd_product)

    rc = sub.add_parser("recouple", parents=[common], help="recoupling matrix between two trees")
    rc.add_argument("leaves")
    rc.add_argument("total")
    rc.add_argument("--from", dest="source", required=True)
    rc.add_argument("--to", dest="target", required=True)
    rc.add_argument("--label", default=None, help="also change the tree of this quasicharacter")
    rc.set_defaults(func=cmd_recouple)

    h = sub.add_parser("hamiltonian", parents=[common], help="assemble and diagonalize the lattice Hamiltonian")
    h.add_argument("--lattice", default=None, help="single-plaquette, grid, cube or a JSON file")
    h.add_argument("--config", default=None, help="JSON config file")
    h.add_argument("--g", type=float, default=None)
    h.add_argument("--delta", type=float, default=None)
    h.add_argument("--jmax", default=None)
    h.add_argument("-k", type=int, default=None)
    h.add_argument("--casimir-cap", default=None)
    h.add_argument("--kinetic-normalization", choices=["ep-h", "hamiltonian"], default=None)
    h.add_argument("--no-wilson", action="store_true")
    h.add_argument("--sweep", type=float, nargs="+", default=None, help="coupling values for an eigenvalue sweep")
    h.add_argument("--csv", default=None, help="write the sweep as CSV")
    h.set_defaults(func=cmd_hamiltonian)

    v = sub.add_parser("verify", parents=[common], help="built-in consistency checks")
    v.add_argument("check", choices=["orthonormality", "wilson"])
    v.add_argument("--N", type=int, default=2)
    v.add_argument("--jmax", default="1")
    v.set_defaults(func=cmd_verify)
    return p


def _is_spin(obj: Any) -> bool:
    return isinstance(obj, dict) and set(obj) == {"spin", "dynkin"}


def _pretty(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if _is_spin(obj):
            return f"{obj['spin']} (dynkin {obj['dynkin']})"
        lines = []
        for key in sorted(obj):
            val = obj[key]
            if isinstance(val, (dict, list)) and val and not _is_spin(val):
                lines.append(f"{pad}{key}:")
                lines.append(_pretty(val, indent + 1))
            else:
                lines.append(f"{pad}{key}: {_pretty(val)}")
        return "\n".join(lines)
    if isinstance(obj, list):
        if all(not isinstance(x, (dict, list)) or _is_spin(x) for x in obj):
            return pad + ", ".join(_pretty(x) for x in obj)
        return "\n".join(_pretty(x, indent) if isinstance(x, (dict, list)) else pad + _pretty(x) for x in obj)
    if isinstance(obj, float):
        return f"{obj:.12g}"
    return str(obj)


def _manifest(argv: Sequence[str], args: argparse.Namespace, conventions: dict, elapsed: float | None) -> dict:
    m = {
        "command": ["artifact", *argv],
        "seed": args.seed,
        "samples": args.samples,
        "tolerance": args.tolerance,
        "versions": {"artifact": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "conventions": {"spin_labels": "spin and dynkin", "phase": "condon-shortley", **conventions},
    }
    if elapsed is not None:
        m["wall_time_s"] = elapsed
    return m


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        result, conventions = args.func(args)
        code = EXIT_OK
    except (FitError, CapacityError, ArithmeticError) as exc:
        result, conventions, code = {"error": type(exc).__name__, "message": str(exc)}, {}, EXIT_NUMERIC
    except (ExactError, UnsupportedLatticeError, ValueError, KeyError, OSError) as exc:
        result, conventions, code = {"error": type(exc).__name__, "message": str(exc)}, {}, EXIT_VALIDATION
    elapsed = time.perf_counter() - start if args.timing else None
    doc = {"schema": SCHEMA, "result": result, "manifest": _manifest(argv, args, conventions, elapsed)}
    text = _pretty(doc) + "\n" if args.pretty else json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK:
        print(f"artifact: {result['error']}: {result['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
