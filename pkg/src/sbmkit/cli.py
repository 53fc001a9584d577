"""Command line front end.

    sbmkit <command> [options]
    sbmkit verify <target> [options]

Every command accepts the shared options --seed, --workers, --out (CSV),
--report (JSON), --plot (SVG), --tol-quad, --tol-mc-se and --config.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or
configuration error, 3 numerical failure (quadrature, inversion, sampler).

A JSON file given with --config supplies default values for any option of
the chosen command (keys are the long option names with dashes or
underscores); options given on the command line win.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, HorizonExceeded, NumericalError, ParameterError, TransienceError
from .report import VerificationReport, dumps

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

VERIFY_TARGETS = ["special-identity", "asymptotics", "regvar", "conditions", "harnack", "bhp",
                  "carleson", "exit-bounds"]


@dataclass
class RunConfig:
    command: str
    target: str | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out: str | None = None
    report: str | None = None
    plot: str | None = None
    tol_quad: float = 1e-10
    tol_mc_se: float = 3.0

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _family_args(p, d=False):
    p.add_argument("--family", default="stable",
                   choices=["stable", "relativistic", "mixture", "logpos", "logneg"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=None)
    if d:
        p.add_argument("--d", type=int, default=3)


def _path_args(p, paths_flag="--paths", paths=10_000):
    p.add_argument(paths_flag, dest="paths", type=int, default=paths)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--eps-jump", type=float, default=1e-6)
    p.add_argument("--refine-levels", type=int, default=8)


def _domain_args(p, default="ball"):
    p.add_argument("--domain", default=default, choices=["ball", "box", "lshape", "slitball", "twoballs"])
    p.add_argument("--radius", type=float, default=None)


def build_parser():
    top = argparse.ArgumentParser(prog="sbmkit", description="Subordinate Brownian motion toolkit.")
    top.add_argument("--version", action="version", version=f"sbmkit {__version__}")
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--seed", type=int, default=0)
    glob.add_argument("--workers", type=int, default=None, help="threads (default: $SBMKIT_WORKERS or 1)")
    glob.add_argument("--out", default=None, help="CSV data file")
    glob.add_argument("--report", default=None, help="JSON report file (default: stdout)")
    glob.add_argument("--plot", nargs="?", const="auto", default=None,
                      help="SVG figure; without a value it is written next to the report or data file")
    glob.add_argument("--tol-quad", type=float, default=1e-10)
    glob.add_argument("--tol-mc-se", type=float, default=3.0, help="Monte Carlo tolerance in standard errors")
    glob.add_argument("--config", default=None, help="JSON file with default option values")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", parents=[glob], help="Bernstein function and slowly varying part")
    _family_args(p)
    p.add_argument("--lam", type=_floats, default=_floats("1e-3,1e-2,1e-1,1,10,100,1e3,1e4,1e5,1e6"))

    p = sub.add_parser("chi", parents=[glob], help="ladder height exponents of the 1-d process")
    _family_args(p)
    p.add_argument("--lam", type=_floats, default=_floats("1e-3,1e-2,1e-1,1,10,100,1e3,1e4,1e5,1e6"))

    p = sub.add_parser("kernel", parents=[glob], help="free Green function or jump kernel")
    _family_args(p, d=True)
    p.add_argument("--which", choices=["green", "jump"], default="green")
    p.add_argument("--r", type=_floats, default=_floats("1e-4,1e-3,1e-2,1e-1,1"))

    p = sub.add_parser("simulate", parents=[glob], help="first exits from a catalog domain")
    _family_args(p, d=True)
    _domain_args(p)
    _path_args(p)
    p.add_argument("--start", type=_floats, default=None)

    p = sub.add_parser("martin", parents=[glob], help="Martin kernel along a boundary approach")
    _family_args(p, d=True)
    _domain_args(p)
    _path_args(p, paths=10_000)
    p.add_argument("--z", type=_floats, default=None, help="boundary point (default: the domain's)")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--r0", type=float, default=0.5)
    p.add_argument("--method", choices=["hunt", "kde"], default="hunt")

    p = sub.add_parser("verify", help="run a verifier")
    vsub = p.add_subparsers(dest="target", required=True)
    for name in VERIFY_TARGETS:
        q = vsub.add_parser(name, parents=[glob])
        _family_args(q, d=name not in ("special-identity", "regvar"))
        if name == "special-identity":
            q.add_argument("--lam-range", type=_floats, default=_floats("1e-3,1e6"))
            q.add_argument("--tol", type=float, default=1e-4)
        if name == "asymptotics":
            q.add_argument("--which", choices=["green", "jump", "both"], default="both")
            q.add_argument("--r", type=_floats, default=_floats("1e-1,1e-2,1e-3,1e-4"))
        if name == "regvar":
            q.add_argument("--r4", type=float, default=None)
        if name in ("harnack", "bhp", "carleson", "exit-bounds"):
            _path_args(q, "--paths-per-point", 4000)
            q.add_argument("--r-grid", type=_floats, default=None)
        if name == "harnack":
            q.add_argument("--x0", type=_floats, default=None)
        if name in ("bhp", "carleson"):
            _domain_args(q)
            q.add_argument("--same-patch", action="store_true")
    return top


_COMMON = {"seed", "workers", "out", "report", "plot", "tol_quad", "tol_mc_se", "config", "command", "target"}


def _leaf_parser(parser, argv):
    """Subparser that will handle argv (needed to apply config defaults)."""
    actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    if not actions:
        return parser
    for tok in argv:
        if tok in actions[0].choices:
            return _leaf_parser(actions[0].choices[tok], argv[argv.index(tok) + 1:])
    return parser


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "config") from None
        if not isinstance(conf, dict):
            raise ConfigError("top level must be an object", "config")
        leaf = _leaf_parser(parser, list(argv))
        dests = {a.dest: a for a in leaf._actions if a.dest != "help"}
        defaults = {}
        for key, value in conf.items():
            dest = key.replace("-", "_")
            if dest not in dests or dest in ("config", "command", "target"):
                raise ConfigError("unknown option", key)
            act = dests[dest]
            if act.type is not None and value is not None:
                try:
                    value = act.type(",".join(map(str, value)) if isinstance(value, list) else value)
                except (ValueError, TypeError, argparse.ArgumentTypeError):
                    raise ConfigError(f"invalid value {value!r}", key) from None
            if act.choices is not None and value not in act.choices:
                raise ConfigError(f"invalid choice {value!r}", key)
            defaults[dest] = value
        leaf.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def run_config(args):
    workers = args.workers if args.workers is not None else int(os.environ.get("SBMKIT_WORKERS", "1"))
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _COMMON}
    return RunConfig(command=args.command, target=getattr(args, "target", None), params=params,
                     seed=args.seed, workers=workers, out=args.out, report=args.report, plot=args.plot,
                     tol_quad=args.tol_quad, tol_mc_se=args.tol_mc_se)


# ---------------------------------------------------------------------------
# helpers


def _family(p):
    from .bernstein import BernsteinFamily, SubordinatorModel

    fam = BernsteinFamily(p["family"], p["alpha"], p["beta"])
    return fam, SubordinatorModel(fam)


def _path_config(cfg):
    from .simulate import PathConfig

    p = cfg.params
    return PathConfig(dt=p["dt"], t_max=p["t_max"], eps_jump=p["eps_jump"], seed=cfg.seed,
                      refine_levels=p["refine_levels"])


def _domain(p, d):
    from .domains import make_domain

    kw = {} if p.get("radius") is None else {"radius": p["radius"]}
    if p["domain"] == "box":
        r = p.get("radius") or 1.0
        return make_domain("box", d, lo=[-r] * d, hi=[r] * d)
    if p["domain"] == "lshape" and kw:
        kw = {"half_side": kw["radius"]}
    return make_domain(p["domain"], d, **kw)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _plot_path(cfg):
    if cfg.plot is None:
        return None
    if cfg.plot != "auto":
        return cfg.plot
    base = cfg.report or cfg.out or f"sbmkit-{cfg.command}{'-' + cfg.target if cfg.target else ''}.json"
    return str(Path(base).with_suffix(".svg"))


class Result:
    """What a command produced: a pass flag, a JSON payload, optional CSV and plot."""

    def __init__(self, passed, payload, table=None, plot=None):
        self.passed = passed
        self.payload = payload
        self.table = table
        self.plot = plot


def _report_result(rep: VerificationReport, table=None, plot=None):
    return Result(rep.passed, rep.to_dict(), table, plot)


# ---------------------------------------------------------------------------
# commands


def cmd_phi(cfg):
    fam, _ = _family(cfg.params)
    lam = np.asarray(cfg.params["lam"], float)
    phi, ell = fam.phi(lam), fam.ell(lam)
    rows = list(zip(lam, phi, ell))
    return Result(True, {"family": fam.label, "lambda": lam, "phi": phi, "ell": ell},
                  (["lambda", "phi", "ell"], rows),
                  ([("phi", lam, phi)], {"xlabel": "lambda", "ylabel": "phi"}))


def cmd_chi(cfg):
    from .fluctuation1d import LadderData

    fam, _ = _family(cfg.params)
    lad = LadderData(fam)
    lam = np.asarray(cfg.params["lam"], float)
    chi, rho = lad.chi(lam), lad.rho(lam)
    dev = chi * rho / lam - 1
    return Result(True, {"family": fam.label, "lambda": lam, "chi": chi, "rho": rho, "deviation": dev},
                  (["lambda", "chi", "rho", "chi_rho_over_lambda_minus_1"], list(zip(lam, chi, rho, dev))),
                  ([("chi", lam, chi), ("rho", lam, rho)], {"xlabel": "lambda", "ylabel": "exponent"}))


def cmd_kernel(cfg):
    from .kernels import KernelEvaluator

    p = cfg.params
    _, model = _family(p)
    ke = KernelEvaluator(model, p["d"], tol=cfg.tol_quad)
    r = np.asarray(p["r"], float)
    if p["which"] == "green":
        val, ratio = ke.green(r), ke.green_ratio(r)
    else:
        val, ratio = ke.jump(r), ke.jump_ratio(r)
    pred = val / ratio
    return Result(True, {"family": model.family.label, "which": p["which"], "r": r, "value": val,
                         "predicted": pred, "ratio": ratio},
                  (["r", "value", "predicted", "ratio"], list(zip(r, val, pred, ratio))),
                  ([(p["which"], r, val), ("predicted", r, pred)], {"ylabel": p["which"]}))


def cmd_simulate(cfg):
    from .simulate import simulate_paths

    p = cfg.params
    fam, model = _family(p)
    dom = _domain(p, p["d"])
    start = np.asarray(p["start"], float) if p["start"] is not None else dom.interior_point()
    pc = _path_config(cfg)
    b = simulate_paths(model, dom, np.repeat(start[None, :], p["paths"], axis=0), pc, workers=cfg.workers)
    d = dom.d
    header = ["path_id", "exit_time"] + [f"exit_x{i}" for i in range(d)] + ["jumped"]
    rows = [[i, b.exit_time[i], *b.exit_point[i], int(b.jumped[i])] for i in range(len(b))]
    mean = float(b.exit_time.mean())
    se = float(b.exit_time.std(ddof=1) / np.sqrt(len(b)))
    payload = {"family": fam.label, "domain": dom.to_dict(), "start": start, "paths": len(b),
               "mean_exit_time": mean, "se": se, "jumped_fraction": float(b.jumped.mean())}
    if dom.kind == "ball" and fam.kind.value == "stable" and d > fam.alpha:
        from .estimators import stable_ball_exit_time

        exact = float(stable_ball_exit_time(fam.alpha, d, dom.geometry["radius"],
                                            start - dom.geometry["center"])[0])
        payload["exact_mean_exit_time"] = exact
        payload["z_score"] = (mean - exact) / se
        passed = abs(mean - exact) <= max(cfg.tol_mc_se * se, 0.01 * exact)
    else:
        passed = True
    t = np.sort(b.exit_time)
    surv = 1.0 - np.arange(1, len(t) + 1) / len(t)
    keep = surv > 0
    return Result(passed, payload, (header, rows),
                  ([("P(tau > t)", t[keep], surv[keep])], {"xlabel": "t", "ylabel": "survival", "scale": "logy"}))


def cmd_martin(cfg):
    from .martin import MartinProbe, martin_limit_report, stable_ball_green

    p = cfg.params
    fam, model = _family(p)
    dom = _domain(p, p["d"])
    z = np.asarray(p["z"], float) if p["z"] is not None else dom.boundary_point()
    x0 = dom.interior_point()
    d = dom.d
    # three evaluation points on a sphere around x0, away from z
    n = (z - x0) / np.linalg.norm(z - x0)
    basis = np.linalg.qr(np.c_[n, np.eye(d)])[0][:, :d]
    s = 0.5 * float(dom.distance_to_boundary(x0[None])[0])
    x_grid = np.array([x0 - s * basis[:, 0], x0 + s * basis[:, 1], x0 - s * basis[:, 1]])
    probe = MartinProbe.geometric(dom, z, x0, x_grid, r0=p["r0"], levels=p["levels"])
    oracle = None
    if dom.kind == "ball" and fam.kind.value == "stable":
        c, R = dom.geometry["center"], dom.geometry["radius"]
        g = lambda a, b: stable_ball_green(fam.alpha, d, R, a - c, b - c)
        oracle = lambda x, y: g(x, y) / g(x0, y)
    rep = martin_limit_report(probe, model, _path_config(cfg), p["paths"], p["method"],
                              workers=cfg.workers, oracle=oracle)
    dist = np.linalg.norm(probe.approach - z, axis=1)
    M = np.asarray(rep.details["M"])
    header = ["level", "distance"] + [f"M_x{j}" for j in range(len(x_grid))]
    rows = [[m + 1, dist[m], *M[m]] for m in range(len(dist))]
    series = [(f"x{j}", dist, M[:, j]) for j in range(M.shape[1])]
    return _report_result(rep, (header, rows), (series, {"xlabel": "|y - z|", "ylabel": "M(x, y)", "scale": "logx"}))


# ----- verifiers -----


def v_special_identity(cfg):
    from .fluctuation1d import LadderData

    p = cfg.params
    fam, _ = _family(p)
    lo, hi = p["lam_range"]
    lam = np.logspace(np.log10(lo), np.log10(hi), 28)
    lad = LadderData(fam)
    dev = np.abs(lad.chi(lam) * lad.rho(lam) / lam - 1)
    rep = VerificationReport("special Bernstein identity", bool(dev.max() < p["tol"]),
                             constants={"max_deviation": float(dev.max())},
                             grids={"lambda": lam}, details={"family": fam.label, "deviation": dev, "tol": p["tol"]})
    return _report_result(rep, (["lambda", "deviation"], list(zip(lam, dev))),
                          ([("|chi rho / lambda - 1|", lam, np.maximum(dev, 1e-17))], {"xlabel": "lambda"}))


def v_asymptotics(cfg):
    from .kernels import KernelEvaluator, check_asymptotics

    p = cfg.params
    _, model = _family(p)
    ke = KernelEvaluator(model, p["d"], tol=cfg.tol_quad)
    rep = check_asymptotics(ke, tuple(p["r"]))
    which = ["green", "jump"] if p["which"] == "both" else [p["which"]]
    r = np.asarray(p["r"], float)
    rows, series = [], []
    for w in which:
        val = ke.green(r) if w == "green" else ke.jump(r)
        ratio = ke.green_ratio(r) if w == "green" else ke.jump_ratio(r)
        rows += [[w, ri, vi, vi / qi, qi] for ri, vi, qi in zip(r, val, ratio)]
        series.append((f"{w} ratio", r, ratio))
    return _report_result(rep, (["which", "r", "value", "predicted", "ratio"], rows),
                          (series, {"ylabel": "ratio to prediction", "reference": 1.0, "scale": "logx"}))


def v_regvar(cfg):
    from .kernels import check_regvar_inequalities

    fam, _ = _family(cfg.params)
    rep = check_regvar_inequalities(fam, r4=cfg.params["r4"])
    return _report_result(rep)


def v_conditions(cfg):
    from .bernstein import check_A1_A4, check_condition_2_5

    p = cfg.params
    fam, model = _family(p)
    r1 = check_condition_2_5(fam)
    r2 = check_A1_A4(model, d=p["d"])
    rep = VerificationReport("standing conditions", bool(r1.passed and r2.passed),
                             details={"envelope_condition": r1.to_dict(), "assumptions": r2.to_dict()})
    return _report_result(rep)


def _r_grid(p, default):
    return np.asarray(p["r_grid"], float) if p.get("r_grid") else default


def v_harnack(cfg):
    from .estimators import verify_harnack

    p = cfg.params
    _, model = _family(p)
    r = _r_grid(p, 2.0 ** -np.arange(2, 7))
    x0 = np.asarray(p["x0"], float) if p["x0"] is not None else np.zeros(p["d"])
    rep = verify_harnack(model, r, x0, p["paths"], d=p["d"], cfg=_path_config(cfg), workers=cfg.workers)
    ratio = rep.details["ratio"]
    return _report_result(rep, (["r", "ratio"], list(zip(r, ratio))),
                          ([("sup/inf", r, ratio)], {"ylabel": "Harnack ratio"}))


def v_bhp(cfg):
    from .estimators import verify_bhp

    p = cfg.params
    _, model = _family(p)
    dom = _domain(p, p["d"])
    rep = verify_bhp(model, dom, None, _r_grid(p, None), p["paths"], _path_config(cfg),
                     same_patch=p["same_patch"], workers=cfg.workers)
    rg = rep.grids["r"]
    C = rep.constants["C_emp"][0]
    return _report_result(rep, (["r", "C_emp"], list(zip(rg, C))),
                          ([(dom.kind, rg, C)], {"ylabel": "C_emp"}))


def v_carleson(cfg):
    from .estimators import verify_carleson

    p = cfg.params
    _, model = _family(p)
    dom = _domain(p, p["d"])
    rep = verify_carleson(model, dom, None, _r_grid(p, None), p["paths"],
                          _path_config(cfg), workers=cfg.workers)
    rg = rep.grids["r"]
    C = rep.constants["C_carleson"][0]
    return _report_result(rep, (["r", "C_carleson"], list(zip(rg, C))),
                          ([(dom.kind, rg, C)], {"ylabel": "max u(x)/u(A)"}))


def v_exit_bounds(cfg):
    from .estimators import exit_time_envelopes

    p = cfg.params
    _, model = _family(p)
    r = _r_grid(p, np.array([0.5, 0.25, 0.125]))
    rep = exit_time_envelopes(model, p["d"], _path_config(cfg), p["paths"], tuple(r), workers=cfg.workers)
    C_up, C_low = rep.constants["C_up"], rep.constants["C_low"]
    return _report_result(rep, (["r", "C_up", "C_low"], list(zip(r, C_up, C_low))),
                          ([("C_up", r, C_up), ("C_low", r, C_low)], {"ylabel": "envelope constant"}))


COMMANDS = {"phi": cmd_phi, "chi": cmd_chi, "kernel": cmd_kernel, "simulate": cmd_simulate, "martin": cmd_martin}
VERIFIERS = {"special-identity": v_special_identity, "asymptotics": v_asymptotics, "regvar": v_regvar,
             "conditions": v_conditions, "harnack": v_harnack, "bhp": v_bhp, "carleson": v_carleson,
             "exit-bounds": v_exit_bounds}


def run(cfg: RunConfig):
    """Execute a RunConfig; returns (exit code, JSON text)."""
    from .simulate import resolve_workers

    cfg.workers = resolve_workers(cfg.workers)
    fn = VERIFIERS[cfg.target] if cfg.command == "verify" else COMMANDS[cfg.command]
    res = fn(cfg)
    payload = {"sbmkit_version": __version__, "config": cfg.to_dict(), "pass": bool(res.passed),
               "result": res.payload}
    text = dumps(payload)
    if cfg.report:
        Path(cfg.report).write_text(text)
    if cfg.out and res.table is not None:
        _write_csv(cfg.out, *res.table)
    path = _plot_path(cfg)
    if path and res.plot is not None:
        from .plotting import emit_plot

        series, opts = res.plot
        opts = dict(opts)
        emit_plot(series, path, scale=opts.pop("scale", "loglog"), title=cfg.target or cfg.command, **opts)
    return (EXIT_PASS if res.passed else EXIT_FAIL), text


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        cfg = run_config(args)
        code, text = run(cfg)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"sbmkit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, DomainError, TransienceError) as exc:
        print(f"sbmkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, HorizonExceeded) as exc:
        print(f"sbmkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not cfg.report:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
