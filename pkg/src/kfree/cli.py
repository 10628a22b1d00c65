"""Unified command-line entry point.

Every subcommand emits a single result document embedding the resolved
configuration and the package version.  Rational numbers serialize as
"p/q" strings, complex numbers as [re, im] pairs.  Exit codes: 0 success,
1 validation error, 2 numerical-regime error (e.g. D < k).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RegimeError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_REGIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _jsonable(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit(args, command: str, result, rows=None) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "config": _jsonable({k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output")}),
        "result": _jsonable(result),
    }
    fmt = getattr(args, "format", "json") or "json"
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        if rows is None:
            raise ValueError("csv format is only available for tabular results")
        header, data = rows
        lines = [",".join(header)]
        for row in data:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        text = "\n".join(lines) + "\n"
    elif fmt == "text":
        text = _textify(doc)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _textify(doc) -> str:
    lines = [f"# {doc['command']} (kfree {doc['version']})"]

    def walk(prefix, val):
        if isinstance(val, dict):
            for k in sorted(val):
                walk(f"{prefix}{k}.", val[k])
        elif isinstance(val, list) and val and isinstance(val[0], (dict, list)):
            for i, v in enumerate(val):
                walk(f"{prefix}{i}.", v)
        else:
            lines.append(f"{prefix[:-1]} = {val}")

    walk("", doc["result"])
    return "\n".join(lines) + "\n"


def _parse_perm(text: str):
    from .permutations import Permutation

    return Permutation(tuple(int(x) for x in text.split(",")))


def _parse_moments(text: str) -> list:
    """Parse a comma list, staying exact (Fraction) whenever possible."""
    out = []
    for tok in text.split(","):
        try:
            out.append(Fraction(tok.strip()))
        except ValueError:
            out.append(complex(float(tok), 0.0))
    return out


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _load_matrix(path: str) -> np.ndarray:
    from .matio import load_operator

    return load_operator(path)


def _default_observable(D: int, seed: int) -> np.ndarray:
    from .eth import goe_matrix, normalize_observable

    return normalize_observable(goe_matrix(D, np.random.default_rng(seed)))


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_nc(args) -> None:
    from .partitions import enumerate_nc, kreweras_complement, nc_lattice, leq

    _require(args, "n")
    parts = enumerate_nc(args.n)
    if args.count:
        _emit(args, "nc", {"n": args.n, "count": len(parts)})
        return
    result = {"n": args.n, "count": len(parts), "partitions": [str(p) for p in parts]}
    if args.kreweras:
        result["kreweras"] = {str(p): str(kreweras_complement(p)) for p in parts}
    if args.moebius:
        lat = nc_lattice(args.n)
        table = {}
        for s in parts:
            for p in parts:
                if leq(s, p):
                    table[f"{s} <= {p}"] = lat.moebius(s, p)
        result["moebius"] = table
    _emit(args, "nc", result)


def _cmd_perm(args) -> None:
    from .permutations import NCEmbeddingError, geodesic_set, permutation_to_nc

    _require(args, "perm")
    alpha = _parse_perm(args.perm)
    result = {
        "permutation": str(alpha),
        "cycles": [list(c) for c in alpha.cycles()],
        "num_cycles": alpha.num_cycles(),
        "length": alpha.length(),
    }
    try:
        result["nc_image"] = str(permutation_to_nc(alpha))
    except NCEmbeddingError as exc:
        result["nc_image"] = None
        result["nc_rejection"] = exc.failed_condition
    if args.geodesic:
        result["geodesic_set"] = [str(b) for b in geodesic_set(alpha)]
    _emit(args, "perm", result)


def _cmd_wg(args) -> None:
    from .weingarten import weingarten_table

    _require(args, "k", "dim")
    table = weingarten_table(args.k, args.dim)
    gram = table.gram()
    wg = table.matrix()
    perms = [str(p) for p in table.perms]
    result = {
        "k": args.k,
        "dim": args.dim,
        "permutations": perms,
        "gram": [[str(x) for x in row] for row in gram],
        "weingarten": [[f"{x.numerator}/{x.denominator}" for x in row] for row in wg],
    }
    _emit(args, "wg", result)


def _cmd_cumulants(args) -> None:
    from .moments import CumulantSet, Expectation

    if args.moments:
        moments = _parse_moments(args.moments)
        phi = Expectation.from_moment_sequence(moments)
        max_order = args.max_order or len(moments)
    elif args.operator:
        m = _load_matrix(args.operator)
        phi = Expectation.normalized_trace({"A": m})
        max_order = args.max_order or 6
    else:
        raise ValueError("need --moments or --operator")
    table = CumulantSet(phi).table("A", max_order)
    rows = (["order", "real", "imag"], [[n, complex(v).real, complex(v).imag] for n, v in table.items()])
    _emit(args, "cumulants", {"kappa": {str(n): complex(v) for n, v in table.items()}}, rows=rows)


def _word_functional(args, prefix: str, k: int):
    """Build the positional-label functional for channel/otoc inputs."""
    from .channel import word_functional_from_matrices
    from .moments import Expectation

    ops_arg = getattr(args, f"{prefix}_ops", None)
    mom_arg = getattr(args, f"{prefix}_moments", None)
    if ops_arg:
        mats = [_load_matrix(p) for p in ops_arg.split(",")]
        if len(mats) == 1:
            mats = mats * k
        if len(mats) != k:
            raise ValueError(f"need 1 or {k} operators for --{prefix}-ops")
        return word_functional_from_matrices(mats)
    if mom_arg:
        base = Expectation.from_moment_sequence(_parse_moments(mom_arg))
        return Expectation(lambda word: base(("A",) * len(word)), cyclic=True)
    raise ValueError(f"need --{prefix}-ops or --{prefix}-moments")


def _cmd_channel(args) -> None:
    from .channel import channel_asymptotic, channel_exact

    _require(args, "k", "dim")
    phi = _word_functional(args, "a", args.k)
    if args.mode == "exact":
        coeffs = channel_exact(args.k, args.dim, phi)
    elif args.mode == "asymptotic":
        coeffs = channel_asymptotic(args.k, args.dim, phi)
    else:
        raise ValueError(f"unknown mode {args.mode!r}")
    out = {}
    for alpha, c in coeffs.coeffs.items():
        out[str(alpha)] = f"{c.numerator}/{c.denominator}" if isinstance(c, Fraction) else complex(c)
    _emit(args, "channel", {"k": args.k, "dim": args.dim, "mode": coeffs.mode, "coefficients": out})


def _cmd_otoc(args) -> None:
    from .channel import otoc_haar

    _require(args, "k")
    phi_a = _word_functional(args, "a", args.k)
    phi_b = _word_functional(args, "b", args.k)
    res = otoc_haar(phi_a, phi_b, args.k, D=args.dim)
    result = {"k": args.k, "formula": complex(res.formula)}
    if res.channel is not None:
        result["dim"] = args.dim
        result["channel"] = complex(res.channel)
    _emit(args, "otoc", result)


def _cmd_haar_test(args) -> None:
    from .ensembles import HaarEnsemble, k_freeness_test

    _require(args, "dim")
    A = _load_matrix(args.a) if args.a else _default_observable(args.dim, args.seed + 101)
    B = _load_matrix(args.b) if args.b else _default_observable(args.dim, args.seed + 202)
    est = k_freeness_test(HaarEnsemble(args.dim), A, B, args.k, n_samples=args.n_samples, seed=args.seed)
    _emit(
        args,
        "haar-test",
        {
            "estimate": complex(est.value),
            "std_error": est.std_error,
            "n_samples": est.n_samples,
            "seed": args.seed,
        },
    )


def _build_ensemble(args):
    from .ensembles import DiscreteEnsemble, HaarEnsemble, HamiltonianEnsemble, clifford_group_1q, pauli_group

    name = args.ensemble
    if name == "pauli":
        return pauli_group()
    if name == "clifford":
        return clifford_group_1q()
    if name == "haar":
        return HaarEnsemble(args.dim)
    if name == "hamiltonian":
        from .eth import goe_model

        model = goe_model(args.dim, seed=args.seed)
        return HamiltonianEnsemble(model, t_max=args.t_max, n_samples=args.n_samples)
    if name == "files":
        if not args.unitaries:
            raise ValueError("--unitaries required for --ensemble files")
        mats = [_load_matrix(p) for p in args.unitaries.split(",")]
        probs = [float(x) for x in args.probs.split(",")] if args.probs else None
        return DiscreteEnsemble(mats, np.array(probs) if probs else None)
    raise ValueError(f"unknown ensemble {name!r}")


def _cmd_design_check(args) -> None:
    from .ensembles import design_check

    _require(args, "ensemble", "k")
    spec = _build_ensemble(args)
    report = design_check(spec, args.k, tolerance=args.tolerance, seed=args.seed)
    _emit(
        args,
        "design-check",
        {
            "ensemble": args.ensemble,
            "k": args.k,
            "passed": report.passed,
            "max_deviation": report.max_deviation,
            "tolerance": report.tolerance,
            "seed": args.seed,
        },
    )


def _cmd_distance(args) -> None:
    from .ensembles import channel_distance

    _require(args, "ensemble", "k")
    spec = _build_ensemble(args)
    dist = channel_distance(spec, args.k, method=args.method, seed=args.seed)
    _emit(
        args,
        "distance",
        {
            "ensemble": args.ensemble,
            "k": args.k,
            "distance": dist,
            "n_samples": args.n_samples,
            "seed": args.seed,
        },
    )


def _eth_model(args):
    from .eth import build_model, goe_model, ising_model

    if args.model == "goe":
        model = goe_model(args.dim, seed=args.seed)
    elif args.model == "ising":
        model = ising_model(args.length)
    else:
        h = _load_matrix(args.model)
        model = build_model(h, provenance=f"file({args.model})")
    for assignment in args.obs or []:
        name, _, path = assignment.partition("=")
        if not path:
            raise ValueError(f"bad --obs {assignment!r}; want NAME=path")
        raw = _load_matrix(path)
        model.observables[name] = model.basis.conj().T @ raw @ model.basis
    return model


def _eth_obs_pair(args, model):
    names = list(model.observables)
    a = args.obs_a or (names[0] if names else None)
    b = args.obs_b or (names[1] if len(names) > 1 else a)
    if a is None:
        raise ValueError("model has no observables; pass --obs NAME=path")
    return a, b


def _cmd_eth(args) -> None:
    from .eth import (
        DeutschSpec,
        TimeWindow,
        alternating_word,
        deutsch_ensemble,
        factorization_gap,
        free_k_time,
        goe_matrix,
        thermal_free_cumulant,
        thermal_state,
        time_average,
    )

    model = _eth_model(args)
    state = thermal_state(model, args.beta)
    action = args.action
    if action == "build":
        result = {
            "dim": model.dim,
            "provenance": model.provenance,
            "spectral_width": model.spectral_width(),
            "level_spacing_ratio": model.level_spacing_ratio(),
            "observables": sorted(model.observables),
            "resonances": model.resonance_report(seed=args.seed),
        }
        _emit(args, "eth build", result)
    elif action == "cumulant":
        a, b = _eth_obs_pair(args, model)
        times = np.linspace(0.0, args.t_max, args.n_points)
        rows_data = []
        for t in times:
            v = thermal_free_cumulant(model, state, alternating_word(a, b, args.k, float(t)))
            rows_data.append([float(t), v.real, v.imag, 0.0])
        rows = (["t", "real", "imag", "std_error"], rows_data)
        _emit(args, "eth cumulant", {"k": args.k, "beta": args.beta, "scan": rows_data}, rows=rows)
    elif action == "timeavg":
        a, b = _eth_obs_pair(args, model)
        word = tuple(x for _ in range(args.k) for x in ((a, True), (b, False)))
        window = TimeWindow("infinite") if args.t_max is None else TimeWindow("finite", args.t_max)
        v = time_average(model, state, word, window)
        _emit(args, "eth timeavg", {"k": args.k, "beta": args.beta, "mode": window.mode, "value": complex(v)})
    elif action == "freetime":
        a, b = _eth_obs_pair(args, model)
        grid = np.linspace(0.0, args.t_max or 40.0 / model.spectral_width() * model.dim**0, args.n_points)
        res = free_k_time(model, state, a, b, args.k, threshold=args.threshold, t_grid=grid)
        rows_data = [[float(t), float(m), 0.0, 0.0] for t, m in zip(res.times, res.magnitudes)]
        rows = (["t", "real", "imag", "std_error"], rows_data)
        _emit(
            args,
            "eth freetime",
            {
                "k": args.k,
                "reached": res.reached,
                "free_time": res.time,
                "threshold": res.threshold,
                "scan": rows_data,
            },
            rows=rows,
        )
    elif action == "appendixb":
        a, b = _eth_obs_pair(args, model)
        window = TimeWindow("infinite") if args.t_max is None else TimeWindow("finite", args.t_max)
        joint, product, gap = factorization_gap(model, state, a, b, window)
        _emit(
            args,
            "eth appendixb",
            {"joint": complex(joint), "product": complex(product), "gap": complex(gap), "mode": window.mode},
        )
    elif action == "deutsch":
        a, _ = _eth_obs_pair(args, model)
        rng = np.random.default_rng(args.seed + 7)
        pert = goe_matrix(model.dim, rng)
        lambdas = tuple(float(x) for x in (args.lambdas or "1,2").split(","))
        spec = DeutschSpec(
            perturbation=pert,
            strength=args.strength if args.strength is not None else model.dim**-0.5,
            lambdas=lambdas,
            beta=args.beta,
        )
        report = deutsch_ensemble(model, spec, observable=a)
        _emit(
            args,
            "eth deutsch",
            {
                "lambdas": list(report.lambdas),
                "mixed_kappa4": {f"{l1},{l2}": complex(v) for (l1, l2), v in report.mixed_kappa4.items()},
                "row_sum_max_error": max(
                    float(np.max(np.abs(o.sum(axis=1) - 1.0))) for o in report.overlaps.values()
                ),
            },
        )
    else:
        raise ValueError(f"unknown eth action {action!r}")


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_common(sub) -> None:
    sub.add_argument("--output", help="write the result document to this path")
    sub.add_argument("--format", choices=["json", "csv", "text"], default="json")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=None, help="BLAS thread hint (recorded; exported to env)")
    sub.add_argument("--config", help="key = value defaults file; flags override")


def build_parser() -> _Parser:
    parser = _Parser(prog="kfree", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kfree {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("nc", help="non-crossing partitions, Moebius tables, Kreweras pairs")
    p.add_argument("--n", type=int)
    p.add_argument("--count", action="store_true")
    p.add_argument("--moebius", action="store_true")
    p.add_argument("--kreweras", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_nc)

    p = subs.add_parser("perm", help="cycle structure, length, geodesics, NC embedding")
    p.add_argument("--perm", help="one-line notation, e.g. 2,3,1")
    p.add_argument("--geodesic", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_perm)

    p = subs.add_parser("wg", help="exact Gram and Weingarten tables")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_wg)

    p = subs.add_parser("cumulants", help="free cumulants from moments or an operator file")
    p.add_argument("--moments", help="comma separated <A>, <A^2>, ...")
    p.add_argument("--operator", help="dense operator file (.json/.bin)")
    p.add_argument("--max-order", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_cumulants)

    p = subs.add_parser("channel", help="k-fold Haar channel coefficients")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--mode", choices=["exact", "asymptotic"], default="exact")
    p.add_argument("--a-ops", dest="a_ops", help="comma separated operator files (1 or k)")
    p.add_argument("--a-moments", dest="a_moments", help="moment sequence for identical inputs")
    p.add_argument("--ops", dest="a_ops", help="alias for --a-ops")
    p.add_argument("--moments", dest="a_moments", help="alias for --a-moments")
    _add_common(p)
    p.set_defaults(func=_cmd_channel)

    p = subs.add_parser("otoc", help="Haar-averaged 2k-OTOC, both evaluation paths")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--a-ops", dest="a_ops")
    p.add_argument("--a-moments", dest="a_moments")
    p.add_argument("--b-ops", dest="b_ops")
    p.add_argument("--b-moments", dest="b_moments")
    _add_common(p)
    p.set_defaults(func=_cmd_otoc)

    p = subs.add_parser("haar-test", help="Monte Carlo freeness probe under Haar")
    p.add_argument("--dim", type=int)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=2000)
    p.add_argument("--a", help="operator file for A (default: seeded GOE observable)")
    p.add_argument("--b", help="operator file for B")
    _add_common(p)
    p.set_defaults(func=_cmd_haar_test)

    p = subs.add_parser("design-check", help="compare an ensemble channel with Haar")
    p.add_argument("--ensemble", help="pauli | clifford | haar | hamiltonian | files")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--t-max", dest="t_max", type=float, default=100.0)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=1000)
    p.add_argument("--unitaries", help="comma separated unitary files")
    p.add_argument("--probs", help="comma separated probabilities")
    _add_common(p)
    p.set_defaults(func=_cmd_design_check)

    p = subs.add_parser("distance", help="Frobenius distance to the Haar channel")
    p.add_argument("--ensemble")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--t-max", dest="t_max", type=float, default=1000.0)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=1000)
    p.add_argument("--method", choices=["auto", "dense", "gram"], default="auto")
    p.add_argument("--unitaries")
    p.add_argument("--probs")
    _add_common(p)
    p.set_defaults(func=_cmd_distance)

    p = subs.add_parser("eth", help="exact-diagonalization freeness machinery")
    p.add_argument("action", choices=["build", "cumulant", "timeavg", "freetime", "appendixb", "deutsch"])
    p.add_argument("--model", default="goe", help="goe | ising | operator file with H")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--length", type=int, default=8, help="chain length for the ising model")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--obs", action="append", help="NAME=path observable assignment (repeatable)")
    p.add_argument("--obs-a", dest="obs_a")
    p.add_argument("--obs-b", dest="obs_b")
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    p.add_argument("--n-points", dest="n_points", type=int, default=41)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--lambdas", help="comma separated couplings for deutsch")
    p.add_argument("--strength", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_eth)

    return parser


def _load_config(path: str) -> dict:
    values: dict[str, object] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}; want key = value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        for cast in (int, float):
            try:
                values[key] = cast(val)
                break
            except ValueError:
                continue
        else:
            values[key] = {"true": True, "false": False}.get(val.lower(), val)
    return values


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        # config entries become trailing options, so explicit flags win and
        # subparser defaults cannot clobber them
        try:
            cfg = _load_config(argv[argv.index("--config") + 1])
        except (IndexError, FileNotFoundError, ValueError) as exc:
            print(f"kfree: bad --config: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for key, val in cfg.items():
            opt = "--" + key.replace("_", "-")
            if opt in argv:
                continue
            if isinstance(val, bool):
                if val:
                    argv.append(opt)
            else:
                argv.extend([opt, str(val)])
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        args.func(args)
    except RegimeError as exc:
        print(f"kfree: regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"kfree: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
