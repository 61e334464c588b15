"""Command-line front end.

Exit codes: 0 success (for ``test``: not rejected), 1 rejected by ``test``,
2 invalid input, 3 file-system failure.  Every structured output is JSON and
every numeric array is CSV; outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io, rng
from .errors import FredholmError, InvalidArgumentError
from .expr import parse
from .fredholm import (
    CATALOG,
    BracketFunction,
    catalog_covariance,
    catalog_kernel,
    covariance_from_kernel,
    factorize,
    psd_sqrt,
    trace_check,
)
from .functionals import SmoothFunctional, stein_residual_1d
from .grid import make_grid
from .ibp import (
    COROLLARY_FORMS,
    FORMS,
    bonferroni_threshold,
    gaussianity_test,
    ibp_corollary,
    ibp_strong,
    ibp_weak,
)
from .simulate import sample_cholesky, sample_compensated_poisson, sample_series

EXIT_OK, EXIT_REJECT, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3

KERNEL_NAMES = CATALOG + ("bridge",)
COVARIANCE_NAMES = ("bm", "bridge", "martingale")
GENERATORS = ("cholesky", "series", "poisson")

DEFAULTS = {
    "grid_n": 128,
    "seed": 0,
    "paths": 10_000,
    "threads": 1,
    "generator": "cholesky",
    "intensity": 1.0,
    "form": "weak",
    "family": "default",
    "alpha": 0.01,
    "source": "normal",
    "column": 0,
}

OUTPUTS = {
    "factorize": "kernel.csv",
    "simulate": "ensemble.csv",
    "ibp": "ibp_report.json",
    "test": "verdict.json",
    "stein1d": "stein1d.json",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--grid-n", type=int, help="number of grid cells n (default 128)")
    g.add_argument("--seed", type=int, help="64-bit unsigned seed (default 0)")
    g.add_argument("--paths", type=int, metavar="M", help="number of Monte-Carlo paths (default 10000)")
    g.add_argument("--out", help="output path")
    g.add_argument("--config", help="JSON file of option values; flags override it")
    g.add_argument("--threads", type=int, help="worker cap for path generation (default 1)")
    return p


def _kernel_opts() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=KERNEL_NAMES, help="catalog kernel ('bridge' = bridge_orthogonal)")
    g.add_argument("--kernel-csv", help="kernel matrix CSV")
    g.add_argument("--bracket", help="bracket CSV (t, <M>_t) for the martingale kernel")
    g.add_argument("--bracket-power", type=float, help="use the bracket <M>_t = t^p")
    return p


def _generator_opts() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("generator")
    g.add_argument("--generator", choices=GENERATORS)
    g.add_argument("--law", choices=KERNEL_NAMES,
                   help="catalog kernel of the simulated law (ibp/test: defaults to --kernel)")
    g.add_argument("--covariance", help="covariance CSV for the cholesky generator")
    g.add_argument("--n-trunc", type=int, help="series truncation (default n)")
    g.add_argument("--intensity", type=float, help="Poisson rate (default 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fredholm-ibp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common, kernel, gen = _common(), _kernel_opts(), _generator_opts()

    p = sub.add_parser("factorize", parents=[common], help="Fredholm kernel of a covariance")
    p.add_argument("--catalog", choices=COVARIANCE_NAMES, help="catalog covariance")
    p.add_argument("--covariance", help="covariance CSV")
    p.add_argument("--bracket", help="bracket CSV for the martingale covariance")
    p.add_argument("--bracket-power", type=float, help="use the bracket <M>_t = t^p")

    sub.add_parser("simulate", parents=[common, kernel, gen], help="write a path ensemble")

    for name, text in (("ibp", "one integration-by-parts check"), ("test", "Gaussianity test")):
        p = sub.add_parser(name, parents=[common, kernel, gen], help=text)
        p.add_argument("--ensemble", help="ensemble CSV; simulated from the generator options if absent")
        if name == "ibp":
            p.add_argument("--form", choices=FORMS)
            p.add_argument("--t", type=float, help="time node for the strong form")
            p.add_argument("--functional", help="functional JSON file")
            p.add_argument("--functional-json", help="functional JSON text")
        else:
            p.add_argument("--family", help="'default' or a JSON file holding a list of functionals")
            p.add_argument("--alpha", type=float)

    p = sub.add_parser("stein1d", parents=[common], help="one-dimensional Stein identity check")
    p.add_argument("--source", choices=("normal", "exponential", "csv"))
    p.add_argument("--f", dest="f", help="test function in prefix notation over z1")
    p.add_argument("--samples-csv", help="CSV of samples (with --source csv)")
    p.add_argument("--column", type=int, help="column of --samples-csv (default 0)")
    return parser


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from the defaults."""
    if args.config:
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as err:
                raise InvalidArgumentError(f"config {args.config}: {err}") from None
        if not isinstance(cfg, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if not hasattr(args, key) or key in ("command", "config"):
                raise InvalidArgumentError(f"unknown config key {key!r} for '{args.command}'")
            if getattr(args, key) is None:
                setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    if args.out is None:
        args.out = OUTPUTS[args.command]
    if args.threads < 1:
        raise InvalidArgumentError("--threads must be at least 1")
    return args


# resolution helpers -------------------------------------------------------------


def _bracket(args, grid) -> Optional[BracketFunction]:
    if args.bracket:
        b = io.read_bracket_csv(args.bracket)
        if b.grid != grid:
            raise InvalidArgumentError(f"bracket has n={b.grid.n}, expected n={grid.n}")
        return b
    if args.bracket_power is not None:
        if args.bracket_power <= 0:
            raise InvalidArgumentError("--bracket-power must be positive")
        return BracketFunction.from_function(grid, lambda t: t ** args.bracket_power)
    return None


def _canonical(name: str) -> str:
    return "bridge_orthogonal" if name == "bridge" else name


def _catalog(name, args, grid):
    name = _canonical(name)
    bracket = _bracket(args, grid) if name == "martingale" else None
    if name == "martingale" and bracket is None:
        raise InvalidArgumentError("the martingale kernel needs --bracket or --bracket-power")
    return catalog_kernel(name, grid, bracket)


def _kernel(args, grid, required=True):
    if args.kernel and args.kernel_csv:
        raise InvalidArgumentError("give only one of --kernel and --kernel-csv")
    if args.kernel_csv:
        k = io.read_kernel_csv(args.kernel_csv)
        if grid is not None and k.grid != grid:
            raise InvalidArgumentError(f"kernel has n={k.grid.n}, expected n={grid.n}")
        return k
    if args.kernel:
        return _catalog(args.kernel, args, grid or make_grid(args.grid_n))
    if required:
        raise InvalidArgumentError("a kernel is required: --kernel NAME or --kernel-csv PATH")
    return None


def _simulate(args, grid, law_kernel):
    workers = args.threads
    if args.generator == "poisson":
        return sample_compensated_poisson(args.intensity, grid, args.paths, args.seed, workers)
    if args.generator == "series":
        if law_kernel is None:
            raise InvalidArgumentError("the series generator needs a kernel")
        n_trunc = grid.n if args.n_trunc is None else args.n_trunc
        return sample_series(law_kernel, n_trunc, args.paths, args.seed, workers)
    if args.covariance:
        R = io.read_covariance_csv(args.covariance)
        if R.grid != grid:
            raise InvalidArgumentError(f"covariance has n={R.grid.n}, expected n={grid.n}")
    elif law_kernel is not None:
        R = covariance_from_kernel(law_kernel)
    else:
        raise InvalidArgumentError("the cholesky generator needs --kernel, --law or --covariance")
    return sample_cholesky(R, args.paths, args.seed, workers)


def _ensemble_and_kernel(args, kernel_required=True):
    """Ensemble (read or simulated) and the hypothesis kernel on its grid."""
    if args.ensemble:
        ens = io.read_ensemble_csv(args.ensemble)
        return ens, _kernel(args, ens.grid, kernel_required)
    kernel = _kernel(args, None, kernel_required)
    grid = kernel.grid if kernel is not None else make_grid(args.grid_n)
    law = _catalog(args.law, args, grid) if args.law else kernel
    return _simulate(args, grid, law), kernel


def _functional(args) -> SmoothFunctional:
    if args.functional and args.functional_json:
        raise InvalidArgumentError("give only one of --functional and --functional-json")
    if args.functional:
        with open(args.functional) as fh:
            text = fh.read()
    elif args.functional_json:
        text = args.functional_json
    else:
        raise InvalidArgumentError("a functional is required: --functional PATH or --functional-json TEXT")
    return SmoothFunctional.from_dict(_load_json(text, "functional"))


def _load_json(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidArgumentError(f"{what} is not valid JSON: {err}") from None


def _family(args):
    if args.family == "default":
        return None
    with open(args.family) as fh:
        data = _load_json(fh.read(), "family")
    if not isinstance(data, list):
        raise InvalidArgumentError("a family file must hold a JSON list of functionals")
    if not data:
        raise InvalidArgumentError("the test family is empty")
    return [SmoothFunctional.from_dict(d) for d in data]


# commands ---------------------------------------------------------------------


def cmd_factorize(args) -> int:
    if bool(args.catalog) == bool(args.covariance):
        raise InvalidArgumentError("give exactly one of --catalog and --covariance")
    if args.covariance:
        R = io.read_covariance_csv(args.covariance)
    else:
        grid = make_grid(args.grid_n)
        bracket = _bracket(args, grid)
        if args.catalog == "martingale" and bracket is None:
            raise InvalidArgumentError("the martingale covariance needs --bracket or --bracket-power")
        R = catalog_covariance(args.catalog, grid, bracket)
    K = factorize(R)
    _, lam_min = psd_sqrt(R)
    back = covariance_from_kernel(K).matrix
    norm = np.linalg.norm(R.matrix)
    err = float(np.linalg.norm(back - R.matrix) / norm) if norm > 0 else float(np.linalg.norm(back))
    summary = {"trace": trace_check(R), "reconstruction_error": err, "min_eigenvalue": lam_min}
    io.atomic_write({
        args.out: io.matrix_csv(K.matrix, R.grid.n),
        io.sidecar_path(args.out): io.dumps_json(summary),
    })
    print(f"n={R.grid.n} trace={summary['trace']:.6g} reconstruction_error={err:.3e} "
          f"min_eigenvalue={lam_min:.3e}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.kernel_csv or args.kernel:
        kernel = _kernel(args, None)
        grid = kernel.grid
    else:
        kernel = None
        grid = io.read_covariance_csv(args.covariance).grid if args.covariance else make_grid(args.grid_n)
    law = _catalog(args.law, args, grid) if args.law else kernel
    ens = _simulate(args, grid, law)
    io.atomic_write({
        args.out: io.ensemble_csv(ens),
        io.sidecar_path(args.out): io.dumps_json(ens.meta),
    })
    print(f"{ens.meta['generator']} M={ens.M} n={grid.n} seed={ens.seed} -> {args.out}")
    return EXIT_OK


def cmd_ibp(args) -> int:
    f = _functional(args)
    corollary = args.form in COROLLARY_FORMS
    ens, kernel = _ensemble_and_kernel(args, kernel_required=not corollary or not args.ensemble)
    if args.form == "strong_at_t":
        if args.t is None:
            raise InvalidArgumentError("the strong form needs --t")
        report = ibp_strong(kernel, ens, f, args.t)
    elif args.form == "weak":
        report = ibp_weak(kernel, ens, f)
    else:
        bracket = _bracket(args, ens.grid) if args.form == "martingale" else None
        if args.form == "martingale" and bracket is None:
            raise InvalidArgumentError("the martingale form needs --bracket or --bracket-power")
        report = ibp_corollary(args.form, ens, f, bracket)
    io.atomic_write({args.out: io.dumps_json(report.to_dict())})
    print(f"{report.form} lhs={report.lhs:.6g} rhs={report.rhs:.6g} zscore={report.zscore:.3f}")
    return EXIT_OK


def cmd_test(args) -> int:
    family = _family(args)
    ens, kernel = _ensemble_and_kernel(args)
    verdict = gaussianity_test(kernel, ens, family, args.alpha)
    io.atomic_write({args.out: io.dumps_json(verdict.to_dict())})
    threshold = bonferroni_threshold(verdict.alpha, len(verdict.reports))
    word = "reject" if verdict.reject else "not rejected"
    print(f"{word}: max|zscore|={verdict.max_abs_zscore:.3f} threshold={threshold:.3f} "
          f"alpha={verdict.alpha:g} M={ens.M}")
    return EXIT_REJECT if verdict.reject else EXIT_OK


def _stein_samples(args) -> np.ndarray:
    if args.source == "csv":
        if not args.samples_csv:
            raise InvalidArgumentError("--source csv needs --samples-csv")
        try:
            data = np.loadtxt(args.samples_csv, delimiter=",", ndmin=2)
        except ValueError as err:
            raise InvalidArgumentError(f"{args.samples_csv}: {err}") from None
        if not 0 <= args.column < data.shape[1]:
            raise InvalidArgumentError(f"column {args.column} out of range")
        return data[:, args.column]
    if args.paths < 2:
        raise InvalidArgumentError("need at least 2 samples")
    seed = rng.check_seed(args.seed)
    rows = np.arange(args.paths)
    if args.source == "normal":
        return rng.normals(seed, rng.STREAMS["stein"], rows, [0])[:, 0]
    return rng.exponentials(seed, rng.STREAMS["stein"], rows, [0])[:, 0] - 1.0


def cmd_stein1d(args) -> int:
    if not args.f:
        raise InvalidArgumentError("--f is required")
    f = parse(args.f)
    result = stein_residual_1d(_stein_samples(args), f)
    io.atomic_write({args.out: io.dumps_json(result.to_dict())})
    print(f"lhs={result.lhs:.6g} rhs={result.rhs:.6g} zscore={result.zscore:.3f}")
    return EXIT_OK


COMMANDS = {
    "factorize": cmd_factorize,
    "simulate": cmd_simulate,
    "ibp": cmd_ibp,
    "test": cmd_test,
    "stein1d": cmd_stein1d,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args = _resolve(args)
        return COMMANDS[args.command](args)
    except (FredholmError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
