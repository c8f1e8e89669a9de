"""Command line front end.

One computation per invocation, no daemon state.  Every flag can also be
given in a TOML config file (--config); explicit flags win.  Exit codes:
0 success, 2 bad usage or precondition, 3 resource cap, 4 I/O or format.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .averaging import maximal_function, multilinear_average
from .core import parse_simplex
from .enumeration import brute_force_embeddings, count_scaling_fit, simplex_embeddings
from .errors import PreconditionError, ResourceLimitError, SlabFormatError
from .fourier import (
    delta_psi_sq_sum,
    orthogonality_sample_points,
    telescoping_decompose,
    u1_norm,
    uniformity_test,
)
from .grids import Box, GridFunction
from .lab import (
    ExperimentConfig,
    corollary_q_check,
    emit_report,
    generate_set,
    pinned_experiment,
)
from .theta import tail_sum, theta_sum

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_RESOURCE = 3
EXIT_IO = 4


# --- argument plumbing ------------------------------------------------------


def _parse_window(text: str) -> list:
    """'7' or 'a..b' (inclusive) as a list of integers."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError as e:
            raise PreconditionError(f"bad radius window {text!r}") from e
        if hi < lo:
            raise PreconditionError(f"bad radius window {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(text)]
    except ValueError as e:
        raise PreconditionError(f"bad radius window {text!r}") from e


def _parse_matrix(text: str) -> list:
    """';'-separated rows of ','-separated floats, like simplex descriptors."""
    rows = []
    for row in text.split(";"):
        row = row.strip()
        if not row:
            continue
        try:
            rows.append([float(c) for c in row.split(",")])
        except ValueError as e:
            raise PreconditionError(f"bad matrix row {row!r}") from e
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise PreconditionError(f"bad matrix {text!r}")
    return rows


def _parse_set_params(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise PreconditionError(f"set parameter {pair!r} is not key=value")
        key, val = pair.split("=", 1)
        if val[:1] in "[{":
            out[key] = json.loads(val)
            continue
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


_GLOBAL_FLAGS = [
    ("--dim", dict(type=int, help="ambient dimension d")),
    ("--simplex", dict(help="descriptor: e-orthonormal:k or rows a,b;c,d")),
    ("--lambda-sq", dict(help="squared radius, int or inclusive range a..b")),
    ("--box", dict(type=int, help="cube side for grids and sets")),
    ("--seed", dict(type=int, help="seed for every random choice")),
    ("--out", dict(help="output path (default stdout)")),
    ("--format", dict(choices=["json", "csv"], help="output format")),
    ("--exact", dict(action="store_true", default=None, help="rational mode")),
    ("--threads", dict(type=int, help="worker processes for counting")),
    ("--node-cap", dict(type=int, help="search node budget")),
    ("--config", dict(help="TOML file with defaults for any flag")),
]

_SET_FLAGS = [
    ("--set-kind", dict(help="bernoulli | congruence | periodic-counterexample | union")),
    (
        "--set-param",
        dict(action="append", metavar="K=V", help="generator parameter, repeatable"),
    ),
]


def _add_flags(sub, flags):
    for name, kw in flags:
        sub.add_argument(name, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simplexlab",
        description="lattice simplex counts, discrete averages, density experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    specs = {
        "enumerate": "count embeddings per squared radius",
        "oracle": "cross-check the counter against the brute-force oracle",
        "scaling": "log-log growth fit of counts over a radius window",
        "average": "multilinear average at a pin",
        "maximal": "sup of averages over a radius window at a pin",
        "pinned": "full pinned-window experiment on a generated set",
        "uniformity": "residue-class density ratio test",
        "u1": "cube-kernel mean-square norm of a grid function",
        "decompose": "telescoping kernel decomposition of a grid function",
        "ortho-probe": "difference-kernel square sums at probe frequencies",
        "theta": "truncated matrix theta sum",
        "dirichlet": "divisor-weighted tail sums vs the reference rate",
        "corollary-q": "congruence-lattice rescaling identity check",
        "generate": "emit a generated lattice set",
    }
    sub = {}
    for name, help_text in specs.items():
        sub[name] = subs.add_parser(name, help=help_text)
        _add_flags(sub[name], _GLOBAL_FLAGS)

    for name in ("average", "maximal", "pinned", "uniformity", "u1", "decompose", "generate"):
        _add_flags(sub[name], _SET_FLAGS)

    for name in ("average", "maximal"):
        sub[name].add_argument("--pin", help="pin coordinates a,b,... (default origin)")
        sub[name].add_argument("--delta", type=float, help="constant-function level")
    sub["average"].add_argument("--sublattice", type=int)
    sub["pinned"].add_argument("--eps", type=float)
    sub["pinned"].add_argument("--eta", type=float)
    sub["pinned"].add_argument("--max-pins", type=int)
    sub["pinned"].add_argument("--sublattice", type=int)
    sub["uniformity"].add_argument("--eta", type=float)
    sub["u1"].add_argument("--delta", type=float, help="constant-function level")
    sub["u1"].add_argument("--q", type=int, help="kernel period")
    sub["u1"].add_argument("--scale-l", type=int, help="kernel length L")
    sub["u1"].add_argument("--interior", action="store_true", default=None)
    sub["u1"].add_argument("--route", choices=["spatial", "fft"])
    sub["decompose"].add_argument("--scale-l", type=int, help="decomposition scale l")
    sub["ortho-probe"].add_argument("--j", type=int, help="dyadic level")
    sub["ortho-probe"].add_argument("--l-max", type=int)
    sub["ortho-probe"].add_argument("--n-random", type=int)
    sub["theta"].add_argument("--k", type=int, help="matrix width")
    sub["theta"].add_argument("--z-re", help="Re Z matrix, rows a,b;c,d")
    sub["theta"].add_argument("--z-im", help="Im Z matrix (positive definite)")
    sub["theta"].add_argument("--script-x", help="d x k phase matrix")
    sub["theta"].add_argument("--script-e", help="d x k center matrix")
    sub["theta"].add_argument("--tol", type=float)
    sub["dirichlet"].add_argument("--k-classes", type=int, help="factor count K")
    sub["dirichlet"].add_argument("--s", type=float, help="Dirichlet exponent")
    sub["dirichlet"].add_argument("--j", help="level, int or range a..b")
    sub["dirichlet"].add_argument("--n-max", type=int)
    sub["corollary-q"].add_argument("--r", type=int, help="congruence modulus")
    return parser


def _load_config(ns: argparse.Namespace) -> None:
    """Fill unset flags from the TOML file; explicit flags keep priority."""
    if not ns.config:
        return
    try:
        with open(ns.config, "rb") as fh:
            table = tomllib.load(fh)
    except OSError as e:
        raise OSError(f"cannot read config {ns.config}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise SlabFormatError(f"bad TOML in {ns.config}: {e}") from e
    for key, val in table.items():
        attr = key.replace("-", "_")
        if not hasattr(ns, attr):
            raise PreconditionError(f"unknown config key {key!r}")
        if getattr(ns, attr) is None:
            setattr(ns, attr, val)


def _need(ns: argparse.Namespace, *names):
    vals = []
    for name in names:
        val = getattr(ns, name)
        if val is None:
            flag = "--" + name.replace("_", "-")
            raise PreconditionError(f"{ns.command} needs {flag}")
        vals.append(val)
    return vals[0] if len(vals) == 1 else vals


def _default(val, fallback):
    return fallback if val is None else val


# --- shared object builders -------------------------------------------------


def _the_simplex(ns):
    dim, desc = _need(ns, "dim", "simplex")
    return parse_simplex(desc, dim)


def _the_set(ns):
    dim, side, kind = _need(ns, "dim", "box", "set_kind")
    params = _parse_set_params(ns.set_param)
    return generate_set(kind, params, Box.cube(side, dim), _default(ns.seed, 0))


def _the_pin(ns, dim):
    if getattr(ns, "pin", None) is None:
        return (0,) * dim
    try:
        pin = tuple(int(c) for c in ns.pin.split(","))
    except ValueError as e:
        raise PreconditionError(f"bad pin {ns.pin!r}") from e
    if len(pin) != dim:
        raise PreconditionError(f"pin has {len(pin)} coordinates, need {dim}")
    return pin


def _count_kwargs(ns) -> dict:
    out = {}
    if ns.threads is not None:
        out["threads"] = ns.threads
    if ns.node_cap is not None:
        out["node_cap"] = ns.node_cap
    return out


def _num(x):
    return str(x) if isinstance(x, Fraction) else x


# --- subcommand handlers ----------------------------------------------------
# each returns (payload_dict, csv_header, csv_rows)


def cmd_enumerate(ns):
    s = _the_simplex(ns)
    window = _parse_window(_need(ns, "lambda_sq"))
    rows = []
    for ls in window:
        res = simplex_embeddings(s, ls, **_count_kwargs(ns))
        rows.append([ls, res.count, res.nodes_visited])
    payload = {
        "dim": s.dim,
        "k": s.k,
        "counts": [{"lambda_sq": r[0], "count": r[1], "nodes": r[2]} for r in rows],
    }
    return payload, ["lambda_sq", "count", "nodes"], rows


def cmd_oracle(ns):
    s = _the_simplex(ns)
    window = _parse_window(_need(ns, "lambda_sq"))
    rows = []
    for ls in window:
        fast = simplex_embeddings(s, ls, **_count_kwargs(ns)).count
        brute = brute_force_embeddings(s, ls)
        rows.append([ls, fast, brute, fast == brute])
    payload = {
        "dim": s.dim,
        "k": s.k,
        "all_match": all(r[3] for r in rows),
        "rows": [
            {"lambda_sq": r[0], "count": r[1], "oracle": r[2], "match": r[3]}
            for r in rows
        ],
    }
    return payload, ["lambda_sq", "count", "oracle", "match"], rows


def cmd_scaling(ns):
    s = _the_simplex(ns)
    window = _parse_window(_need(ns, "lambda_sq"))
    fit = count_scaling_fit(s, window, **_count_kwargs(ns))
    payload = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "predicted_exponent": fit.predicted_exponent,
        "ratio_min": fit.ratio_min,
        "ratio_max": fit.ratio_max,
        "points": [{"lambda_sq": ls, "count": c} for ls, c in fit.points],
    }
    return payload, ["lambda_sq", "count"], [list(p) for p in fit.points]


def _average_inputs(ns):
    s = _the_simplex(ns)
    if ns.set_kind is not None:
        A = _the_set(ns)
        f = A.indicator()
    else:
        side = _need(ns, "box")
        delta = _default(getattr(ns, "delta", None), 1.0)
        f = GridFunction.constant(Box.cube(side, s.dim), delta)
    return s, [f] * s.k, _the_pin(ns, s.dim)


def cmd_average(ns):
    s, fs, pin = _average_inputs(ns)
    window = _parse_window(_need(ns, "lambda_sq"))
    exact = bool(ns.exact)
    kwargs = {"exact": exact}
    if ns.sublattice is not None:
        kwargs["sublattice"] = ns.sublattice
    rows = []
    for ls in window:
        val = multilinear_average(fs, s, ls, pin, **kwargs)
        rows.append([ls, _num(val)])
    payload = {
        "pin": list(pin),
        "values": [{"lambda_sq": r[0], "value": r[1]} for r in rows],
    }
    return payload, ["lambda_sq", "value"], rows


def cmd_maximal(ns):
    s, fs, pin = _average_inputs(ns)
    window = _parse_window(_need(ns, "lambda_sq"))
    val = maximal_function(fs, s, window, pin, exact=bool(ns.exact))
    payload = {
        "pin": list(pin),
        "lambda_sq_min": window[0],
        "lambda_sq_max": window[-1],
        "value": _num(val),
    }
    header = ["lambda_sq_min", "lambda_sq_max", "value"]
    return payload, header, [[window[0], window[-1], _num(val)]]


def cmd_pinned(ns):
    dim, desc, side, kind = _need(ns, "dim", "simplex", "box", "set_kind")
    window = _parse_window(_need(ns, "lambda_sq"))
    cfg = ExperimentConfig(
        dim=dim,
        simplex=desc,
        set_kind=kind,
        set_params=_parse_set_params(ns.set_param),
        lambda_sq_min=window[0],
        lambda_sq_max=window[-1],
        box_side=side,
        eps=_default(ns.eps, 0.1),
        eta=ns.eta,
        scale_q=_default(ns.sublattice, 1),
        seed=_default(ns.seed, 0),
        max_pins=ns.max_pins,
    )
    report = pinned_experiment(cfg)
    header = ["pin_index", "pin", "lambda_sq", "value"]
    rows = []
    for p, row in enumerate(report.values):
        pin = " ".join(str(c) for c in report.pins[p])
        for i, v in enumerate(row):
            rows.append([p, pin, report.lambda_sqs[i], str(v)])
    return report.to_dict(), header, rows


def cmd_uniformity(ns):
    A = _the_set(ns)
    rep = uniformity_test(A, _need(ns, "eta"))
    payload = {
        "eta": rep.eta,
        "q": rep.q,
        "delta_hat": str(rep.delta_hat),
        "max_ratio": str(rep.max_ratio),
        "max_ratio_float": float(rep.max_ratio),
        "worst_residue": list(rep.worst_residue),
        "threshold": rep.threshold,
        "is_uniform": rep.is_uniform,
    }
    header = ["eta", "q", "max_ratio", "threshold", "is_uniform"]
    return payload, header, [[rep.eta, rep.q, float(rep.max_ratio), rep.threshold, rep.is_uniform]]


def cmd_u1(ns):
    q, L = _need(ns, "q", "scale_l")
    if ns.set_kind is not None:
        f = _the_set(ns).indicator()
    else:
        dim, side = _need(ns, "dim", "box")
        f = GridFunction.constant(Box.cube(side, dim), _default(ns.delta, 1.0))
    route = _default(ns.route, "spatial")
    interior = bool(ns.interior)
    val = u1_norm(f, f.box, q, L, interior=interior, route=route)
    payload = {"q": q, "L": L, "route": route, "interior": interior, "value": val}
    header = ["q", "L", "route", "interior", "value"]
    return payload, header, [[q, L, route, interior, val]]


def cmd_decompose(ns):
    scale = _need(ns, "scale_l")
    if ns.set_kind is not None:
        f = _the_set(ns).indicator()
    else:
        dim, side = _need(ns, "dim", "box")
        rng = np.random.default_rng(_default(ns.seed, 0))
        box = Box.cube(side, dim)
        f = GridFunction(box, rng.standard_normal(box.extents))
    dec = telescoping_decompose(f, scale)
    err = (dec.reconstruct().values - f.values).__abs__().max()
    rows = [[lab, p.l2_norm()] for lab, p in zip(dec.labels, dec.parts)]
    payload = {
        "l": dec.l,
        "levels": dec.levels,
        "parts": [{"label": r[0], "l2": r[1]} for r in rows],
        "reconstruction_error": float(err),
    }
    return payload, ["label", "l2"], rows


def cmd_ortho_probe(ns):
    j, l_max = _need(ns, "j", "l_max")
    dim = _default(ns.dim, 2)
    pts = orthogonality_sample_points(
        j, dim, seed=_default(ns.seed, 2718), n_random=_default(ns.n_random, 20)
    )
    rows = []
    for xi in pts:
        total = delta_psi_sq_sum(j, l_max, xi)
        rows.append([" ".join(str(float(c)) for c in xi), total])
    payload = {
        "j": j,
        "l_max": l_max,
        "max_sum": max(r[1] for r in rows),
        "rows": [{"xi": r[0], "sum": r[1]} for r in rows],
    }
    return payload, ["xi", "sum"], rows


def cmd_theta(ns):
    k = _need(ns, "k")
    dim = _need(ns, "dim")
    z_re = _parse_matrix(_need(ns, "z_re"))
    z_im = _parse_matrix(_need(ns, "z_im"))
    Z = np.asarray(z_re) + 1j * np.asarray(z_im)
    script_x = np.asarray(_parse_matrix(ns.script_x)) if ns.script_x else None
    script_e = np.asarray(_parse_matrix(ns.script_e)) if ns.script_e else None
    res = theta_sum(
        Z, script_x, script_e, d=dim, k=k, tol=_default(ns.tol, 1e-10)
    )
    payload = {
        "k": k,
        "d": dim,
        "Z": {"re": z_re, "im": z_im},
        "X_script": None if script_x is None else script_x.tolist(),
        "E_script": None if script_e is None else script_e.tolist(),
        "R": res.radius,
        "value_re": float(res.value.real),
        "value_im": float(res.value.imag),
        "tail_bound": res.tail_bound,
    }
    header = ["k", "d", "R", "value_re", "value_im", "tail_bound"]
    row = [k, dim, res.radius, payload["value_re"], payload["value_im"], res.tail_bound]
    return payload, header, [row]


def cmd_dirichlet(ns):
    K, s, n_max = _need(ns, "k_classes", "s", "n_max")
    js = _parse_window(_need(ns, "j"))
    rows = []
    for j in js:
        rep = tail_sum(K, s, j, n_max)
        rows.append([j, s, K, n_max, rep.total, rep.reference, rep.ratio])
    payload = {
        "rows": [
            {
                "j": r[0],
                "s": r[1],
                "K": r[2],
                "N_max": r[3],
                "sum": r[4],
                "bound": r[5],
                "ratio": r[6],
            }
            for r in rows
        ]
    }
    return payload, ["j", "s", "K", "N_max", "sum", "bound", "ratio"], rows


def cmd_corollary_q(ns):
    r = _need(ns, "r")
    dim = _default(ns.dim, 5)
    window = _parse_window(_default(ns.lambda_sq, "1..9"))
    rep = corollary_q_check(
        r,
        dim=dim,
        simplex=_default(ns.simplex, "e-orthonormal:1"),
        lambda_sq_max=window[-1],
        box_side=_default(ns.box, 11),
    )
    rows = [
        [
            row.lambda_sq,
            row.count_set,
            row.rescaled_lambda_sq,
            row.count_rescaled,
            row.matched,
        ]
        for row in rep.rows
    ]
    payload = {
        "r": r,
        "dim": dim,
        "box_side": rep.box_side,
        "passes": rep.passes,
        "rows": [
            {
                "lambda_sq": r_[0],
                "count_set": r_[1],
                "rescaled_lambda_sq": r_[2],
                "count_rescaled": r_[3],
                "matched": r_[4],
            }
            for r_ in rows
        ],
    }
    header = ["lambda_sq", "count_set", "rescaled_lambda_sq", "count_rescaled", "matched"]
    return payload, header, rows


def cmd_generate(ns):
    A = _the_set(ns)
    pts = A.points()
    payload = {
        "kind": ns.set_kind,
        "params": _parse_set_params(ns.set_param),
        "seed": _default(ns.seed, 0),
        "dim": A.box.dim,
        "box_side": A.box.side(),
        "count": A.count,
        "density": str(A.density()),
        "points": [list(map(int, p)) for p in pts],
    }
    header = [f"x{i}" for i in range(A.box.dim)]
    rows = [list(map(int, p)) for p in pts]
    return payload, header, rows


_HANDLERS = {
    "enumerate": cmd_enumerate,
    "oracle": cmd_oracle,
    "scaling": cmd_scaling,
    "average": cmd_average,
    "maximal": cmd_maximal,
    "pinned": cmd_pinned,
    "uniformity": cmd_uniformity,
    "u1": cmd_u1,
    "decompose": cmd_decompose,
    "ortho-probe": cmd_ortho_probe,
    "theta": cmd_theta,
    "dirichlet": cmd_dirichlet,
    "corollary-q": cmd_corollary_q,
    "generate": cmd_generate,
}


# --- output -----------------------------------------------------------------


def _render(payload, header, rows, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"


def _write_out(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write output to {out}: {e}") from e


def run(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    _load_config(ns)
    payload, header, rows = _HANDLERS[ns.command](ns)
    _write_out(_render(payload, header, rows, _default(ns.format, "json")), ns.out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except PreconditionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ResourceLimitError as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except SlabFormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
