"""Command-line interface: ``so3fda <command> [options]``.

Commands: simulate, pem, align, test, table1, gait. Shared options may also be
given in a flat ``key=value`` config file (``--config``); keys mirror the long
option names and explicit command-line options win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import estimate as est
from . import fileio, gait, gpsim, study, testing
from .curves import EULER_CONVENTION, RotCurve, rot_to_euler

LOSS_CHOICES = {"i1": "I1", "i2": "I2", "imean": "Imean", "l2quat": "L2quat"}
ON_OFF = {"on": True, "off": False}


def _fmt(x) -> str:
    return repr(float(x))


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def read_config(path) -> dict[str, str]:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


# --- parser ----------------------------------------------------------------------


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--config", help="flat key=value file of option defaults")
    g.add_argument("--grid-size", type=int, default=101, help="points of the common time grid")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--loss", choices=sorted(LOSS_CHOICES), default="imean")
    g.add_argument("--tie-rule", choices=testing.TIE_RULES, default="conservative")
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--nperm", type=int, default=1000, help="number of permutations")
    g.add_argument("--spatial", choices=ON_OFF, default="on")
    g.add_argument("--temporal", choices=ON_OFF, default="on")
    g.add_argument("--euler-convention", default=EULER_CONVENTION, help="intrinsic axis order, e.g. XYZ")
    g.add_argument("--encoding", choices=fileio.ENCODINGS, default=None, help="payload encoding of input/output files")
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    parser = argparse.ArgumentParser(prog="so3fda", description="Statistics for samples of rotation curves.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared], help="draw curves from a benchmark GP model")
    p.add_argument("--model", choices=gpsim.MODEL_TAGS, required=True)
    p.add_argument("-n", "--n", type=int, required=True, help="number of curves")
    p.add_argument("--scale", type=float, default=1.0, help="noise scale multiplier")
    p.add_argument("--misalign", action="store_true", help="apply the fixed marker-placement pair (P, Q)")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pem", parents=[shared], help="pointwise extrinsic mean as Euler angles")
    p.add_argument("input")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_pem)

    p = sub.add_parser("align", parents=[shared], help="register sample chi1 onto chi2")
    p.add_argument("chi1")
    p.add_argument("chi2")
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("-o", "--out", help="write the aligned chi1 sample here")
    p.add_argument("--report", default="-", help="key=value summary (default stdout)")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("test", parents=[shared], help="two-sample permutation test")
    p.add_argument("chi1")
    p.add_argument("chi2")
    p.add_argument("--variant", choices=("none", "prereg", "continual"), default="none")
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--out", default="-", help="report file (default stdout)")
    p.add_argument("--perm-stats", help="CSV of per-permutation statistics")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("table1", parents=[shared], help="acceptance rates over the 5x5 model grid")
    p.add_argument("--scale", choices=("smoke", "desk", "paper"), default="desk")
    p.add_argument("--tables", nargs="+", choices=tuple(study.TABLES), default=list(study.TABLES))
    p.add_argument("--n", type=int, default=10, help="curves per sample")
    p.add_argument("--sims", type=int, help="override the tier's number of simulations")
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--out", default="-", help="text tables (default stdout)")
    p.add_argument("--csv", help="also write all cells as CSV")
    p.set_defaults(func=cmd_table1, temporal="off", nperm=None)

    p = sub.add_parser("gait", parents=[shared], help="knee curves E_u E_l^T from two frame files")
    p.add_argument("upper")
    p.add_argument("lower")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_gait)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
        # config strings still need the option's type conversion and choices
        for action in sub._actions:
            if action.dest in cfg and getattr(args, action.dest) == cfg[action.dest]:
                value = action.type(cfg[action.dest]) if action.type else cfg[action.dest]
                if action.choices is not None and value not in action.choices:
                    parser.error(f"config {action.dest}={value!r} not in {sorted(action.choices)}")
                setattr(args, action.dest, value)
    if args.grid_size < 2:
        parser.error("--grid-size must be at least 2")
    if not 0 < args.alpha < 1:
        parser.error("--alpha must lie in (0, 1)")
    if args.nperm is not None and args.nperm < 1:
        parser.error("--nperm must be positive")
    return args


def _opts(args) -> est.AlignOptions:
    loss = LOSS_CHOICES[args.loss]
    return est.AlignOptions(
        use_spatial=ON_OFF[args.spatial],
        use_temporal=ON_OFF[args.temporal],
        max_iter=getattr(args, "max_iter", 20),
        tol=getattr(args, "tol", 1e-3),
        loss=loss if loss in est.INTRINSIC_LOSSES else "Imean",
    )


def _load(args, path) -> list[RotCurve]:
    return fileio.load_sample(path, args.encoding, args.grid_size, args.euler_convention)


# --- commands ------------------------------------------------------------------


def cmd_simulate(args) -> None:
    if args.n < 1:
        raise ValueError("empty sample: --n must be at least 1")
    t = np.linspace(0.0, 1.0, args.grid_size)
    spec = gpsim.make_model(args.model, t, args.scale)
    X = gpsim.sample_gp_array(spec, gpsim.make_rng(args.seed), args.n)
    if args.misalign:
        P, Q = gpsim.misalignment()
        X = P @ X @ Q
    curves = [RotCurve(t, x) for x in X]
    _write(args.out, fileio.format_sample(curves, args.encoding or "matrix", convention=args.euler_convention))


def cmd_pem(args) -> None:
    res = est.pem(_load(args, args.input))
    angles = rot_to_euler(res.curve.R, args.euler_convention)
    lines = ["t,ax,ay,az"]
    lines += [",".join(map(_fmt, (tk, *a))) for tk, a in zip(res.curve.t, angles)]
    _write(args.out, "\n".join(lines) + "\n")


def cmd_align(args) -> None:
    chi1, chi2 = _load(args, args.chi1), _load(args, args.chi2)
    aligned, res = est.sample_align(chi1, chi2, _opts(args))
    if args.out:
        fileio.save_sample(args.out, aligned, args.encoding or "matrix", convention=args.euler_convention)
    P_deg = rot_to_euler(res.P, args.euler_convention)
    Q_deg = rot_to_euler(res.Q, args.euler_convention)
    lines = [
        "P_euler_deg=" + ",".join(map(_fmt, P_deg)),
        "Q_euler_deg=" + ",".join(map(_fmt, Q_deg)),
        f"iterations={res.iterations}",
        f"converged={str(res.converged).lower()}",
        f"unique={str(res.unique).lower()}",
    ]
    if res.warp is not None:
        lines.append(f"warp_sup_dist={_fmt(res.warp.sup_dist_identity())}")
    _write(args.report, "\n".join(lines) + "\n")


def run_test(args, chi1, chi2) -> testing.TestReport:
    loss = LOSS_CHOICES[args.loss]
    t = chi1[0].t
    plan = testing.PermutationPlan(len(chi1), len(chi2), args.nperm, args.seed)
    kw = dict(t=t, plan=plan, loss=loss, alpha=args.alpha, tie_rule=args.tie_rule, n_jobs=args.jobs)
    if args.variant == "none":
        return testing.test_no_action(chi1, chi2, **kw)
    fn = testing.test_prereg if args.variant == "prereg" else testing.test_continual
    return fn(chi1, chi2, opts=_opts(args), **kw)


def cmd_test(args) -> None:
    rep = run_test(args, _load(args, args.chi1), _load(args, args.chi2))
    _write(args.out, rep.to_text())
    if args.perm_stats:
        lines = ["index,statistic"] + [f"{i},{_fmt(s)}" for i, s in enumerate(rep.statistics_perm)]
        Path(args.perm_stats).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_table1(args) -> None:
    kw = dict(
        n=args.n,
        alpha=args.alpha,
        seed=args.seed,
        grid_size=args.grid_size,
        scale=args.noise_scale,
        loss=LOSS_CHOICES[args.loss],
        tie_rule=args.tie_rule,
        opts=_opts(args),
        n_jobs=args.jobs,
    )
    cfg = study.StudyConfig.tier(args.scale, **kw)
    if args.sims is not None:
        cfg = study.replace(cfg, n_sims=args.sims)
    if args.nperm is not None:
        cfg = study.replace(cfg, n_perm=args.nperm)
    text, cells = [], []
    for table in args.tables:
        res = study.run_table(cfg, table)
        cells += res
        text.append(study.format_table(res))
    _write(args.out, "\n".join(text))
    if args.csv:
        Path(args.csv).write_text(study.cells_to_csv(cells), encoding="utf-8")


def cmd_gait(args) -> None:
    uid, upper = fileio.load_labeled(args.upper, args.encoding, args.grid_size, args.euler_convention)
    lid, lower = fileio.load_labeled(args.lower, args.encoding, args.grid_size, args.euler_convention)
    ids, knees = gait.knee_from_labeled(uid, upper, lid, lower)
    _write(args.out, fileio.format_sample(knees, args.encoding or "matrix", ids, args.euler_convention))


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"so3fda {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
