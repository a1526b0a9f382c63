"""``koopgen`` command-line interface.

Subcommands ``generate``, ``learn``, ``identify``, ``lyapunov`` and
``reproduce``. Exit codes: 0 ok, 2 configuration or integrity problem,
3 data generation failure, 4 fit failure, 5 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import (BasisMismatch, BranchCut, ConfigError, ConvergenceFailure,
                      CoordinateNotInDictionary, IntegrationError, IntegrityError,
                      NonDiagonalizable)
from .. import apps
from . import pipeline
from .config import ExperimentConfig

log = logging.getLogger("koopgen")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_FIT = 4
EXIT_VERIFY = 5

EXPECTED_FORMAT = "koopgen.expected/1"


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail_on(code, *exc_types):
    """Translate library exceptions raised inside ``fn`` into ``CliFailure``."""
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except exc_types as exc:
                raise CliFailure(code, f"{type(exc).__name__}: {exc}") from exc
        return inner
    return wrap


_FIT_ERRORS = (BranchCut, NonDiagonalizable, ConvergenceFailure, CoordinateNotInDictionary,
               np.linalg.LinAlgError)


# -- argument parsing --------------------------------------------------------

def _parse_baseline(text: str) -> float:
    key, _, value = text.partition("=")
    if key.strip() != "s" or not value:
        raise argparse.ArgumentTypeError("expected s=<time>, e.g. s=0.5")
    try:
        s = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not s > 0:
        raise argparse.ArgumentTypeError("baseline time must be positive")
    return s


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", help="JSON config file, or a manifest.json written by a stage")
    g.add_argument("--output", help="output directory")
    g.add_argument("--field", help='"vanderpol", "vanderpol-reversed" or "linear:a=<float>"')
    g.add_argument("--dictionary", help='e.g. "monomials2d:max_i=3,max_j=2"')
    g.add_argument("--domain", nargs=2, type=float, action="append", metavar=("LO", "HI"),
                   help="sampling interval of one coordinate; repeat once per dimension")
    g.add_argument("--per-axis", type=int, dest="per_axis", help="samples per axis")
    g.add_argument("--sampling", choices=("grid", "random"))
    g.add_argument("--seed", type=int)
    g.add_argument("--lambda", type=float, dest="lam", help="resolvent parameter lambda")
    g.add_argument("--tau", type=float, help="truncation horizon tau")
    g.add_argument("--quadrature", choices=("augmented-ode", "snapshot-quadrature"))
    g.add_argument("--lenient", action="store_true",
                   help="drop failed samples instead of aborting")
    r = p.add_argument_group("runtime")
    r.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $KOOPGEN_THREADS or CPU count)")
    r.add_argument("--backend", choices=("compiled", "python"), default=None,
                   help="integration kernel (default: compiled when built)")
    r.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopgen",
        description="Learn Koopman generators from finite-horizon trajectory data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate the field and write a training set")
    _common(p)

    p = sub.add_parser("learn", help="fit the generator matrix (and optionally the baseline)")
    _common(p)
    p.add_argument("--dataset", help="training-set directory (default: <output>/dataset)")
    p.add_argument("--baseline", type=_parse_baseline, metavar="s=T",
                   help="also fit the Koopman matrix at time T and take its logarithm")

    p = sub.add_parser("identify", help="recover the vector field from the learned generator")
    _common(p)
    p.add_argument("--dataset", help="training-set directory (default: <output>/dataset)")
    p.add_argument("--baseline", type=_parse_baseline, metavar="s=T",
                   help="baseline sampling time (default: from the config)")
    p.add_argument("--no-baseline", action="store_true", help="skip the log baseline")

    p = sub.add_parser("lyapunov", help="fit and verify a polynomial Lyapunov function")
    _common(p)
    p.add_argument("--dataset", help="training-set directory (default: <output>/dataset)")
    p.add_argument("--theta-file", help="CSV of weights to verify instead of fitting")
    p.add_argument("--require-pass", action="store_true",
                   help="exit 5 when the verification verdict is FAIL")

    p = sub.add_parser("reproduce", help="run the whole pipeline and compare with expected values")
    p.add_argument("--quick", action="store_true", help="scaled-down run with looser tolerances")
    p.add_argument("--output", help="output directory (default: koopgen-reproduce[-quick])")
    p.add_argument("--expected", help="expected-values JSON (default: the packaged file)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--backend", choices=("compiled", "python"), default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _threads(args):
    if args.threads is not None:
        if args.threads < 1:
            raise CliFailure(EXIT_CONFIG, "--threads must be >= 1")
        return args.threads
    env = os.environ.get("KOOPGEN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise CliFailure(EXIT_CONFIG, f"KOOPGEN_THREADS={env!r} is not an integer") from None
        if n < 1:
            raise CliFailure(EXIT_CONFIG, "KOOPGEN_THREADS must be >= 1")
        return n
    return None


def _config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        # stage manifests carry the full configuration under "config"
        base = data["config"] if isinstance(data.get("config"), dict) else data
    overrides = {k: getattr(args, k) for k in
                 ("output", "field", "dictionary", "domain", "per_axis", "sampling", "seed",
                  "lam", "tau", "quadrature")}
    if "lam" in overrides:
        overrides["lambda"] = overrides.pop("lam")
    if args.lenient:
        overrides["strict"] = False
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(merged)


# -- subcommands --------------------------------------------------------------

@_fail_on(EXIT_GENERATION, IntegrationError)
def _generate(cfg, threads, backend):
    return pipeline.run_generate(cfg, threads, backend)


def _dataset(args, cfg, threads):
    """Load ``--dataset`` (which then fixes the configuration) or generate."""
    if getattr(args, "dataset", None):
        ts, d, stored = pipeline.load_dataset(args.dataset)
        stored.output = cfg.output
        stored.baseline_s = cfg.baseline_s
        return ts, d, stored
    path = pipeline.dataset_dir(cfg)
    if (path / "manifest.json").exists():
        ts, d, stored = pipeline.load_dataset(path)
        if stored.data_hash() == cfg.data_hash():
            return ts, d, cfg
        log.info("dataset in %s was generated with a different config; regenerating", path)
    ts, d = _generate(cfg, threads, args.backend)
    return ts, d, cfg


@_fail_on(EXIT_FIT, *_FIT_ERRORS)
def _learn(cfg, ts, d, baseline_s, backend):
    return pipeline.run_learn(cfg, ts, d, baseline_s, backend)


@_fail_on(EXIT_FIT, *_FIT_ERRORS)
def _identify(cfg, d, learned):
    return pipeline.run_identify(cfg, d, learned)


@_fail_on(EXIT_FIT, *_FIT_ERRORS)
def _lyapunov(cfg, d, learned, theta_file):
    return pipeline.run_lyapunov(cfg, d, learned, theta_file)


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    ts, _ = _generate(cfg, _threads(args), args.backend)
    dropped = len(ts.dropped)
    print(f"wrote {pipeline.dataset_dir(cfg)}: X {ts.M}x{ts.N}, dropped {dropped}")
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = _config_from_args(args)
    ts, d, cfg = _dataset(args, cfg, _threads(args))
    learned = _learn(cfg, ts, d, args.baseline, args.backend)
    print(f"wrote {Path(cfg.output) / 'learn'}: L {learned.gm.N}x{learned.gm.N}, "
          f"rank {learned.gm.rank_used}, residual {learned.gm.residual:.3e}")
    if learned.baseline_diag is not None:
        print(f"baseline s={learned.km.s}: max |imag(L_log)| "
              f"{learned.baseline_diag['max_abs_imag']:.3e}")
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _config_from_args(args)
    ts, d, cfg = _dataset(args, cfg, _threads(args))
    s = None if args.no_baseline else (args.baseline or cfg.baseline_s)
    learned = _learn(cfg, ts, d, s, args.backend)
    free, base = _identify(cfg, d, learned)
    print(f"log-free max error on grid: {free.max_error:.3e}")
    if base is not None:
        print(f"log-baseline max error on grid: {base.max_error:.3e} "
              f"(ratio {base.max_error / free.max_error:.3g})")
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    cfg = _config_from_args(args)
    ts, d, cfg = _dataset(args, cfg, _threads(args))
    learned = _learn(cfg, ts, d, None, args.backend)
    try:
        cand, verdict = _lyapunov(cfg, d, learned, args.theta_file)
    except (OSError, ValueError) as exc:
        raise CliFailure(EXIT_CONFIG, f"cannot use theta file: {exc}") from exc
    print(f"V(x) = {apps.polynomial_string(d, cand.coefficients)}")
    print(f"reversed Lie derivative at origin: {cand.value_at_origin + 0.0:.4g}")
    print(f"verdict: {'PASS' if verdict.passed else 'FAIL'}"
          + ("" if verdict.passed else f" ({'; '.join(verdict.failures)})"))
    if args.require_pass and not verdict.passed:
        return EXIT_VERIFY
    return EXIT_OK


# -- reproduce ----------------------------------------------------------------

def load_expected(path=None) -> dict:
    """Expected-values file, validated. Raises :class:`IntegrityError`."""
    try:
        if path is None:
            text = resources.files("koopgen").joinpath("data/expected_tables.json").read_text()
        else:
            text = Path(path).read_text()
        data = json.loads(text)
    except (OSError, ValueError) as exc:
        raise IntegrityError(f"expected-values file is unreadable: {exc}") from None
    if not isinstance(data, dict) or data.get("format") != EXPECTED_FORMAT:
        raise IntegrityError("expected-values file has the wrong format tag")
    modes = data.get("modes")
    if not isinstance(modes, dict) or not {"full", "quick"} <= set(modes):
        raise IntegrityError("expected-values file lacks the full/quick modes")
    for mode in modes.values():
        if not isinstance(mode.get("checks"), list) or not isinstance(mode.get("config"), dict):
            raise IntegrityError("every mode needs a config object and a checks list")
        for chk in mode["checks"]:
            if not isinstance(chk, dict) or chk.get("kind") not in _CHECKS or "name" not in chk:
                raise IntegrityError(f"malformed check entry: {chk!r}")
    return data


def _cell(key: str):
    i, j = key.split(",")
    return int(i), int(j)


def _check_weights(chk, ctx):
    fit = ctx["free"].coordinates[chk["coordinate"]]
    table = fit.table_re
    tol = float(chk["tol"])
    dominant = {_cell(k): float(v) for k, v in chk["dominant"].items()}
    worst_dom = max(abs(table[c] - v) for c, v in dominant.items())
    mask = ~np.isnan(table)
    for c in dominant:
        mask[c] = False
    worst_other = float(np.abs(table[mask]).max()) if mask.any() else 0.0
    worst_imag = float(np.nanmax(np.abs(fit.table_im)))
    ok = worst_dom <= tol and worst_other <= tol and worst_imag <= tol
    return ok, (f"dominant dev {worst_dom:.2e}, max other {worst_other:.2e}, "
                f"max imag {worst_imag:.2e} (tol {tol:g})")


def _check_error_ratio(chk, ctx):
    ratio = ctx["base"].max_error / ctx["free"].max_error
    return ratio >= chk["min_ratio"], f"ratio {ratio:.3g} (need >= {chk['min_ratio']:g})"


def _check_imag_min(chk, ctx):
    fit = ctx["base"].coordinates[chk["coordinate"]]
    m = float(np.nanmax(np.abs(fit.table_im)))
    return m >= chk["min"], f"max |imag| {m:.3e} (need >= {chk['min']:g})"


def _check_lyapunov_coefficients(chk, ctx):
    d, theta = ctx["d"], ctx["cand"].coefficients
    worst, parts = 0.0, []
    for key, want in chk["coefficients"].items():
        i, j = _cell(key)
        got = float(theta[d.index_of((i, j))])
        rel = abs(got - want) / abs(want)
        worst = max(worst, rel)
        parts.append(f"x1^{i}x2^{j}={got:.3f}")
    return worst <= chk["rel_tol"], (f"{', '.join(parts)}; worst rel dev {worst:.3f} "
                                     f"(tol {chk['rel_tol']:g})")


def _check_lyapunov_pass(chk, ctx):
    v = ctx["verdict"]
    return v.passed, (f"min V {v.positivity_margin:.3e}, max reversed Lie "
                      f"{v.decrease_margin:.3e}")


def _check_origin_band(chk, ctx):
    lo, hi = chk["band"]
    val = ctx["cand"].value_at_origin
    return lo <= val <= hi, (f"reversed Lie derivative at 0 = {val:.4f} "
                             f"(band [{lo:g}, {hi:g}])")


_CHECKS = {
    "weights": _check_weights,
    "error_ratio": _check_error_ratio,
    "imag_min": _check_imag_min,
    "lyapunov_coefficients": _check_lyapunov_coefficients,
    "lyapunov_pass": _check_lyapunov_pass,
    "origin_band": _check_origin_band,
}


def run_checks(checks, ctx):
    """Evaluate checks; returns a list of ``(name, ok, detail)``."""
    results = []
    for chk in checks:
        try:
            ok, detail = _CHECKS[chk["kind"]](chk, ctx)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise IntegrityError(f"check {chk.get('name')!r} is malformed: {exc}") from None
        results.append((chk["name"], bool(ok), detail))
    return results


def cmd_reproduce(args) -> int:
    expected = load_expected(args.expected)
    mode_name = "quick" if args.quick else "full"
    mode = expected["modes"][mode_name]
    output = args.output or ("koopgen-reproduce-quick" if args.quick else "koopgen-reproduce")
    data = dict(mode["config"])
    data["output"] = output
    cfg = ExperimentConfig.from_dict(data)
    threads = _threads(args)

    start = time.perf_counter()
    ts, d = _generate(cfg, threads, args.backend)
    learned = _learn(cfg, ts, d, cfg.baseline_s, args.backend)
    free, base = _identify(cfg, d, learned)
    cand, verdict = _lyapunov(cfg, d, learned, None)
    elapsed = time.perf_counter() - start

    ctx = {"d": d, "free": free, "base": base, "cand": cand, "verdict": verdict}
    results = run_checks(mode["checks"], ctx)
    width = max(len(name) for name, _, _ in results)
    print(f"reproduce ({mode_name}): M={ts.M}, lambda={cfg.lam:g}, tau={cfg.tau:g}, "
          f"{elapsed:.1f} s")
    for name, ok, detail in results:
        print(f"  {'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = [name for name, ok, _ in results if not ok]
    report = {
        "mode": mode_name,
        "elapsed_seconds": elapsed,
        "config": cfg.to_dict(),
        "checks": [{"name": n, "passed": ok, "detail": det} for n, ok, det in results],
        "passed": not failed,
    }
    pipeline.io.write_json(Path(output) / "report.json", report)
    if failed:
        print(f"FAIL: first failing check: {failed[0]}")
        return EXIT_VERIFY
    print("PASS: all checks")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "learn": cmd_learn,
    "identify": cmd_identify,
    "lyapunov": cmd_lyapunov,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except CliFailure as exc:
        print(f"koopgen: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, IntegrityError, BasisMismatch) as exc:
        print(f"koopgen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
