"""Command-line front end: ``vdm <command> [options]``.

Exit status is 0 on success, 1 when a verification suite fails or training
diverges, and 2 for configuration errors.
"""

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from . import divergences as dv
from .densities import best_fit, load_mixture
from .saddle import random_saddle, smoothness_constant, verify_rate
from .trainer import (GMM_DIVERGENCES, GMM_REFIT, GMM_TRAIN, TrainingDiverged,
                      cross_matrix, objective_exact, train)
from .verify import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise ConfigError(f"cannot write {path!r}: {exc.strerror}") from None


def _fmt(x):
    return repr(float(x))


def _spec(args):
    return dv.make_spec(args.divergence, pi=args.pi, alpha=args.alpha)


def _train_config(args, base=GMM_TRAIN):
    steps = base.steps if args.steps is None else args.steps
    average = min(base.average_last, steps // 4) if args.average_last is None else args.average_last
    kw = dict(steps=steps, average_last=average, seed=args.seed)
    if args.batch is not None:
        kw["batch_size"] = args.batch
    if args.eta is not None:
        kw["step_size"] = args.eta
    if args.optimizer is not None:
        kw["optimizer"] = args.optimizer
        if args.optimizer == "adam" and args.eta is not None:
            kw["adam_params"] = (args.eta,) + tuple(base.adam_params[1:])
    if args.clip is not None:
        kw["clip_norm"] = args.clip
    if args.update is not None:
        kw["generator_update"] = args.update
    return replace(base, **kw)


# --- commands ---------------------------------------------------------------------


def cmd_list(args):
    print(dv.format_listing(dv.listing()))
    return EXIT_OK


def cmd_gmm(args):
    spec = _spec(args)
    p = load_mixture(args.mixture)
    cfg = _train_config(args)
    gen, net, trace = train(spec, p, cfg)
    f_hat = objective_exact(spec, net, gen, p)
    if args.out:
        fh, own = _open_out(args.out)
        try:
            trace.to_csv(fh)
        finally:
            if own:
                fh.close()
    fit = best_fit(spec, p)
    print("divergence\tF_hat\tmu_hat\tsigma_hat\tD_f\tmu_star\tsigma_star")
    print(f"{spec.label}\t{f_hat:.4f}\t{gen.mu:.4f}\t{gen.sigma:.4f}\t"
          f"{fit.value:.4f}\t{fit.mu:.4f}\t{fit.sigma:.4f}")
    return EXIT_OK


def write_matrix(fh, names, matrix):
    writer = csv.writer(fh)
    writer.writerow(["trained_for"] + list(names))
    for name, row in zip(names, matrix):
        writer.writerow([name] + [_fmt(v) for v in row])


def cmd_gmm_matrix(args):
    p = load_mixture(args.mixture)
    cfg = _train_config(args)
    refit_steps = GMM_REFIT.steps if args.refit_steps is None else args.refit_steps
    refit = replace(GMM_REFIT, seed=args.seed + 1, batch_size=cfg.batch_size, steps=refit_steps)
    matrix, _ = cross_matrix(p, cfg, refit)
    fh, own = _open_out(args.out)
    try:
        write_matrix(fh, GMM_DIVERGENCES, matrix)
    finally:
        if own:
            fh.close()
    if own:
        width = max(len(n) for n in GMM_DIVERGENCES)
        print(" " * width + "".join(f"{n[:10]:>12}" for n in GMM_DIVERGENCES))
        for name, row in zip(GMM_DIVERGENCES, matrix):
            print(f"{name:<{width}}" + "".join(f"{v:12.4f}" for v in row))
    return EXIT_OK


def curve_table(spec, v_min, v_max, n=1000):
    """Rows (v, g(v), -f*(g(v))): the two terms of the saddle objective."""
    v = np.linspace(v_min, v_max, n)
    return v, dv.eval_activation(spec, v), -dv.eval_fused_second_term(spec, v)


def cmd_curves(args):
    if not (np.isfinite(args.vmin) and np.isfinite(args.vmax) and args.vmin < args.vmax):
        raise ConfigError("--vmin and --vmax must be finite with vmin < vmax")
    v, first, second = curve_table(_spec(args), args.vmin, args.vmax)
    fh, own = _open_out(args.out)
    try:
        writer = csv.writer(fh)
        writer.writerow(["v", "g_f", "neg_conjugate"])
        for row in zip(v, first, second):
            writer.writerow([_fmt(x) for x in row])
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = run_suites(names)
    failed = 0
    for name, (checks, seconds) in results.items():
        bad = [c for c in checks if not c.passed]
        failed += len(bad)
        status = "PASS" if not bad else "FAIL"
        print(f"{status} {name}: {len(checks) - len(bad)}/{len(checks)} checks ({seconds:.2f} s)")
        for c in checks:
            if args.verbose or not c.passed:
                print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    if len(names) > 1:
        print(f"{'PASS' if not failed else 'FAIL'} all: {failed} failing checks")
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_saddle_demo(args):
    steps = 200 if args.steps is None else args.steps
    rng = np.random.default_rng(args.seed)
    s = random_saddle(args.dim_theta, args.dim_omega, delta=args.delta, seed=args.seed)
    L = smoothness_constant(s)
    pi0 = rng.standard_normal(s.n_theta + s.n_omega)
    check = verify_rate(s, pi0, steps, L)
    fh, own = _open_out(args.out)
    try:
        writer = csv.writer(fh)
        writer.writerow(["t", "J", "bound"])
        for t, (j, b) in enumerate(zip(check.J, check.bound)):
            writer.writerow([t, _fmt(j), _fmt(b)])
    finally:
        if own:
            fh.close()
    rate = 1.0 - s.delta ** 2 / (2.0 * L)
    msg = (f"delta={s.delta:.4f} L={L:.4f} eta={s.delta / L:.4f} "
           f"bound={rate:.4f} worst_ratio={check.worst_ratio:.4f}")
    print(msg, file=sys.stderr if not own else sys.stdout)
    return EXIT_OK if check.passed else EXIT_FAIL


# --- argument parsing ----------------------------------------------------------------


def _add_divergence(p, default):
    p.add_argument("--divergence", default=default, help="divergence name or alias")
    p.add_argument("--alpha", type=float, default=None, help="shape of the alpha family")
    p.add_argument("--pi", type=float, default=None, help="weight of weighted Jensen-Shannon")


def _add_training(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None, help=f"default {GMM_TRAIN.steps}")
    p.add_argument("--batch", type=int, default=None, help=f"default {GMM_TRAIN.batch_size}")
    p.add_argument("--eta", type=float, default=None, help=f"default {GMM_TRAIN.step_size}")
    p.add_argument("--optimizer", choices=("sgd", "adam"), default=None)
    p.add_argument("--clip", type=float, default=None, help="gradient-norm clip")
    p.add_argument("--update", default=None, help="standard, heuristic, gan1, gan2 or gan3")
    p.add_argument("--average-last", type=int, default=None,
                   help="average the generator over this many final steps")
    p.add_argument("--mixture", default="paper-gmm", help="preset name or JSON file")
    p.add_argument("--out", default=None, help="CSV output path")


def build_parser():
    parser = argparse.ArgumentParser(prog="vdm", description="Variational divergence minimization")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="divergence families with f'(1) and conjugate domains")

    p = sub.add_parser("gmm", help="fit a Gaussian to a mixture")
    _add_divergence(p, "kl")
    _add_training(p)

    p = sub.add_parser("gmm-matrix", help="5x5 cross-divergence matrix")
    _add_training(p)
    p.add_argument("--refit-steps", type=int, default=None,
                   help=f"network-only refit steps per cell, default {GMM_REFIT.steps}")

    p = sub.add_parser("curves", help="sample both saddle-objective terms over v")
    _add_divergence(p, "gan")
    p.add_argument("--vmin", type=float, default=-6.0)
    p.add_argument("--vmax", type=float, default=6.0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="run property suites")
    p.add_argument("suite", nargs="?", default="all", choices=list(SUITES) + ["all"])
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("saddle-demo", help="J and its geometric bound on a random quadratic saddle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--dim-theta", type=int, default=2)
    p.add_argument("--dim-omega", type=int, default=2)
    p.add_argument("--out", default=None)
    return parser


COMMANDS = {
    "list": cmd_list,
    "gmm": cmd_gmm,
    "gmm-matrix": cmd_gmm_matrix,
    "curves": cmd_curves,
    "verify": cmd_verify,
    "saddle-demo": cmd_saddle_demo,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"vdm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"vdm: training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
