"""Command-line front end: ``revspec <subcommand> [options]``.

Every subcommand writes its artifacts (CSV or JSON) into ``--out`` together
with a ``run.json`` manifest.  Options may also come from a JSON file given
by ``--config``; command-line flags win over the file.  Exit status is 0 on
success, 2 on validation failures and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericError, RevspecError, ValidationError

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list:
    """``"1,2,3"`` or ``"lo:hi:n"`` (log-spaced) into a list of floats."""
    text = str(text).strip()
    try:
        if text.count(":") == 2:
            lo, hi, n = text.split(":")
            return list(np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(n)))
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse number list {text!r}") from exc


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("common options")
    g.add_argument("--surface", help="sphere | ellipsoid:b=<b> | custom:path=<csv>")
    g.add_argument("--out", help="output directory (default: revspec-out)")
    g.add_argument("--seed", type=int, help="seed for randomized test points")
    g.add_argument("--threads", type=int, help="worker threads (default: $REVSPEC_THREADS or 1)")
    g.add_argument("--quick", action="store_true", default=None, help="reduced grids")
    g.add_argument("--config", help="JSON file with option values")


_DEFAULTS = {"surface": "sphere", "out": "revspec-out", "seed": 0, "threads": None, "quick": False}

# subcommand -> (help, {option: (type, default, help)})
_SPECS = {
    "surface": ("sample the profile and validate it", {
        "n": (int, 401, "number of samples"),
    }),
    "clairaut": ("tau, omega and g on an I-grid", {
        "n": (int, 41, "interior Chebyshev points"),
    }),
    "action-curve": ("the closed action curve gamma", {
        "n": (int, 512, "arc-length samples"),
    }),
    "convexity": ("convexity criterion for non-intersection", {}),
    "twist": ("twist classification", {
        "n": (int, 16, "Chebyshev points for omega'"),
    }),
    "geodesic": ("integrate the geodesic flow from one covector", {
        "state": (_floats, [0.0, 0.3, 0.5, 0.4], "theta,sigma,Theta,Sigma"),
        "time": (float, 20.0, "final time"),
        "samples": (int, 201, "output rows"),
    }),
    "bichlen": ("bicharacteristic length psi and the profile d(sigma, t)", {
        "x": (_floats, [0.0, 0.2], "theta,sigma of the first point"),
        "y": (_floats, [3.0, -0.2], "theta,sigma of the second point"),
        "sigma": (float, None, "also tabulate d(sigma, t)"),
        "t_grid": (_floats, [0.5, 1.0, 1.5, 2.0, 2.5], "t values for d(sigma, t)"),
    }),
    "dmu": ("Fourier transform of the curve measure", {
        "curve": (str, "gamma", "gamma | circle | synthetic"),
        "direction": (_floats, [0.0, 1.0], "s,t"),
        "lambda_grid": (_floats, "1:1000:61", "lambda values or lo:hi:n"),
    }),
    "vdc": ("Van der Corput certificate and bound check", {
        "phase": (str, "x^3 on [-1,1]", "corpus name or power coefficients 'c0,c1,...'"),
        "interval": (_floats, [-1.0, 1.0], "a,b for coefficient phases"),
        "p_max": (int, 4, "highest derivative order"),
        "lambda_grid": (_floats, "10:100000:21", "lambda values or lo:hi:n"),
    }),
    "mixed-verify": ("mixed finite-type bound on a 2D polynomial phase", {
        "phase": (str, "y^2/2 + x^3 y", "'y^2/2 + x^3 y', 'y^2/2 + x^2 y', 'x^2/2 + y^2/2' or 'i,j,c;...'"),
        "p": (int, 6, "order of the remaining 1D phase"),
        "lambda_grid": (_floats, "100:10000:25", "lambda values or lo:hi:n"),
    }),
    "eig": ("separated Laplace-Beltrami spectrum", {
        "lambda_max": (float, 20.0, "largest frequency"),
        "grid": (int, None, "finite-volume cells"),
    }),
    "weyl": ("pointwise Weyl counting function", {
        "lambda_max": (float, 40.0, "table size"),
        "lambdas": (_floats, [10.0, 20.0, 30.0, 40.0], "lambda values"),
        "sigma": (float, 0.4, "latitude"),
        "table": (str, None, "directory with modes.csv/profiles.csv"),
    }),
    "projector": ("sharp projector norm scan", {
        "lambda_max": (float, 102.0, "table size"),
        "lambda_grid": (_floats, [40.0, 60.0, 80.0, 100.0], "lambda values"),
        "kappa_grid": (_floats, [0.0, 1 / 32, 0.25], "delta = lambda^-kappa"),
        "eps": (float, 0.4, "distance to the poles"),
        "table": (str, None, "directory with modes.csv/profiles.csv"),
    }),
    "pole-scan": ("pole values of zonal modes per window", {
        "lambda_max": (float, 102.0, "table size"),
        "lambda_grid": (_floats, None, "window edges (default dyadic)"),
        "table": (str, None, "directory with modes.csv/profiles.csv"),
    }),
    "sup-scan": ("eigenfunction sup norms away from the poles", {
        "lambda_max": (float, 102.0, "table size"),
        "eps": (float, 0.4, "distance to the poles"),
        "lambda_grid": (_floats, None, "window edges (default dyadic)"),
        "table": (str, None, "directory with modes.csv/profiles.csv"),
    }),
    "verify-all": ("run the acceptance checks", {
        "only": (_floats, None, "subset of criterion numbers"),
    }),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"revspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (help_text, opts) in _SPECS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_common(p)
        for opt, (typ, _default, h) in opts.items():
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, type=typ, default=None, help=h)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags; unknown config keys are errors."""
    opts = _SPECS[args.command][1]
    cfg = dict(_DEFAULTS)
    for k, (typ, default, _) in opts.items():
        cfg[k] = typ(default) if isinstance(default, str) and typ is _floats else default
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError(f"{args.config}: top level must be an object")
        for key, val in data.items():
            k = key.replace("-", "_")
            if k not in cfg:
                raise ValidationError(f"{args.config}: unknown field {key!r} for '{args.command}'")
            if k in opts and opts[k][0] is _floats and not isinstance(val, list):
                val = _floats(val)
            elif k in opts and val is not None and not isinstance(val, list):
                try:
                    val = opts[k][0](val)
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"{args.config}: field {key!r}: {exc}") from exc
            cfg[k] = val
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["threads"] is None:
        env = os.environ.get("REVSPEC_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError as exc:
            raise ValidationError(f"REVSPEC_THREADS must be an integer, got {env!r}") from exc
    if cfg["threads"] < 1:
        raise ValidationError("threads must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# output helpers


class _Run:
    def __init__(self, out: Path):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []

    def csv(self, name: str, header, rows):
        path = self.out / name
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.artifacts.append(name)
        return path

    def json(self, name: str, payload):
        from .verify import _jsonable

        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.artifacts.append(name)
        return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _profile(cfg):
    from .surface import make_profile

    return make_profile(cfg["surface"])


def _table(cfg, profile):
    from .spectrum import load_table, spectrum_table

    if cfg.get("table"):
        return load_table(cfg["table"], profile)
    return spectrum_table(profile, cfg["lambda_max"], threads=cfg["threads"])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_surface(cfg, run):
    from .surface import validate

    prof = _profile(cfg)
    s = np.linspace(-0.5 * prof.L, 0.5 * prof.L, cfg["n"])
    f, df, d2f = prof.f_eval(s)
    run.csv("surface.csv", ["sigma", "f", "df", "d2f"], zip(s, f, df, d2f))
    rep = validate(prof)
    run.json("surface.json", {"surface": prof.label, "L": prof.L, "area": prof.area(), "checks": rep.checks(),
                              "passed": rep.passed})
    return {"passed": rep.passed}


def _cmd_clairaut(cfg, run):
    from .clairaut import _turning_points, chebyshev_interior_grid, clairaut_table, omega, tau
    from .action import little_g

    prof = _profile(cfg)
    I = chebyshev_interior_grid(cfg["n"])
    t, w, g = tau(prof, I), omega(prof, I), little_g(prof, I)
    wp = clairaut_table(prof).omega_prime(I)
    sp = _turning_points(prof, I)
    run.csv("clairaut.csv", ["I", "sigma_plus", "tau", "omega", "omega_prime", "g"], zip(I, sp, t, w, wp, g))
    return {}


def _cmd_action_curve(cfg, run):
    from .action import gamma_curve

    c = gamma_curve(_profile(cfg), n=cfg["n"])
    run.csv("gamma.csv", ["u", "q1", "q2", "curvature"], zip(c.u, c.h[:, 0], c.h[:, 1], c.curvature))
    run.json("gamma.json", {"total_length": c.total_length, "winding_number": c.winding_number(),
                            "inflections": c.inflections, "info": c.info})
    return {}


def _cmd_convexity(cfg, run):
    from .action import convexity_check

    rep = convexity_check(_profile(cfg))
    f = _profile(cfg).f(rep.sigma_grid)
    rows = ((s, frac * fs, e) for s, fs, E_row in zip(rep.sigma_grid, f, rep.E)
            for frac, e in zip(rep.p_fractions, E_row))
    run.csv("convexity.csv", ["sigma", "p", "E"], rows)
    run.json("convexity.json", rep.as_dict())
    print(json.dumps({"passed": rep.passed}))
    return {}


def _cmd_twist(cfg, run):
    from .clairaut import twist_classify

    rep = twist_classify(_profile(cfg), n_grid=cfg["n"])
    run.json("twist.json", rep.as_dict())
    print(json.dumps({"class": rep.cls}))
    return {}


def _cmd_geodesic(cfg, run):
    from .flow import CotangentState, geodesic_trajectory

    prof = _profile(cfg)
    st = cfg["state"]
    if len(st) != 4:
        raise ValidationError("--state needs theta,sigma,Theta,Sigma")
    rows = geodesic_trajectory(prof, CotangentState(*st), np.linspace(0.0, cfg["time"], cfg["samples"]))
    run.csv("trajectory.csv", ["t", "theta", "sigma", "Theta", "Sigma", "p1", "I"], rows)
    return {}


def _cmd_bichlen(cfg, run):
    from .flow import bicharacteristic_length, d_profile

    prof = _profile(cfg)
    x, y = cfg["x"], cfg["y"]
    if len(x) != 2 or len(y) != 2:
        raise ValidationError("--x and --y need theta,sigma")
    out = {"x": x, "y": y, "psi": bicharacteristic_length(prof, x, y)}
    if cfg["sigma"] is not None:
        dp = d_profile(prof, cfg["sigma"], cfg["t_grid"])
        run.csv("d_profile.csv", ["t", "d", "dt_d", "dtt_d", "equator_ratio"],
                zip(dp.t, dp.d, dp.dt, dp.dtt, dp.equator_ratio()))
    run.json("bichlen.json", out)
    return {}


def _cmd_dmu(cfg, run):
    from .action import gamma_curve
    from .oscint import circle_curve, dmu_hat, synthetic_inflection_curve

    kind = cfg["curve"]
    if kind == "gamma":
        curve = gamma_curve(_profile(cfg))
    elif kind == "circle":
        curve = circle_curve(1.0)
    elif kind == "synthetic":
        curve = synthetic_inflection_curve()
    else:
        raise ValidationError(f"unknown curve {kind!r}")
    rows = []
    for lam in cfg["lambda_grid"]:
        v = dmu_hat(curve, lam, cfg["direction"])
        rows.append((lam, v.real, v.imag, abs(v)))
    run.csv("dmu.csv", ["lambda", "re", "im", "abs"], rows)
    return {}


def _cmd_vdc(cfg, run):
    from .oscint import SampledPhase1D, osc_integral_1d, phase_corpus, vdc_bound, vdc_detect

    corpus = phase_corpus()
    if cfg["phase"] in corpus:
        phase, _ = corpus[cfg["phase"]]
    else:
        try:
            coeffs = [float(c) for c in cfg["phase"].split(",")]
        except ValueError as exc:
            raise ValidationError(f"unknown phase {cfg['phase']!r}") from exc
        a, b = cfg["interval"]
        phase = SampledPhase1D.polynomial(coeffs, a, b)
    p_max = min(cfg["p_max"], phase.p_max)
    cert = vdc_detect(phase, p_max)
    ratio, scaled = 0.0, 0.0
    for lam in cfg["lambda_grid"]:
        v = abs(osc_integral_1d(phase, None, lam))
        ratio = max(ratio, v / vdc_bound(cert, lam))
        scaled = max(scaled, lam ** (1.0 / cert.p) * v)
    run.json("vdc.json", {"certificate": cert.as_dict(), "verified": cert.verify(phase),
                          "bound_ratio_sup": ratio, "scaling_sup": scaled})
    return {}


_MIXED = {
    "y^2/2 + x^3 y": {(0, 2): 0.5, (3, 1): 1.0},
    "y^2/2 + x^2 y": {(0, 2): 0.5, (2, 1): 1.0},
    "x^2/2 + y^2/2": {(0, 2): 0.5, (2, 0): 0.5},
}


def _cmd_mixed(cfg, run):
    from .oscint import Phase2D, mixed_bound_verify

    terms = _MIXED.get(cfg["phase"])
    if terms is None:
        try:
            terms = {}
            for item in cfg["phase"].split(";"):
                i, j, c = item.split(",")
                terms[(int(i), int(j))] = float(c)
        except ValueError as exc:
            raise ValidationError(f"bad 2D phase {cfg['phase']!r}; use 'i,j,c;...'") from exc
    C = np.zeros((max(i for i, _ in terms) + 1, max(j for _, j in terms) + 1))
    for (i, j), c in terms.items():
        C[i, j] = c
    rep = mixed_bound_verify(Phase2D.polynomial(C), cfg["lambda_grid"], cfg["p"])
    run.json("mixed.json", rep.as_dict())
    run.csv("mixed.csv", ["lambda", "abs_I", "rhs", "scaled", "admissible"],
            zip(rep.lambdas, np.abs(rep.values), rep.rhs, rep.scaled, rep.admissible))
    return {}


def _cmd_eig(cfg, run):
    from .spectrum import save_table, spectrum_table

    prof = _profile(cfg)
    table = spectrum_table(prof, cfg["lambda_max"], n_grid=cfg["grid"], threads=cfg["threads"])
    save_table(table, run.out)
    run.artifacts += ["modes.csv", "profiles.csv"]
    run.json("eig.json", table.info)
    return {}


def _cmd_weyl(cfg, run):
    from .spectrum import weyl_pointwise

    prof = _profile(cfg)
    table = _table(cfg, prof)
    rows = []
    for lam in cfg["lambdas"]:
        r = weyl_pointwise(table, (0.0, cfg["sigma"]), lam)
        rows.append((lam, r["N"], r["leading"], r["remainder"], r["N_coordinate"], r["leading_coordinate"]))
    run.csv("weyl.csv", ["lambda", "N", "leading", "remainder", "N_coordinate", "leading_coordinate"], rows)
    return {}


def _cmd_projector(cfg, run):
    from .projector import norm_scan

    prof = _profile(cfg)
    table = _table(cfg, prof)
    sc = norm_scan(table, cfg["eps"], cfg["lambda_grid"], cfg["kappa_grid"])
    cols = ["lambda", "kappa", "delta", "sup_kernel", "ratio", "argmax_sigma"]
    run.csv("projector.csv", cols, ([r[c] for c in cols] for r in sc.rows))
    run.json("projector.json", {"slopes": sc.slopes, "slopes_compensated": sc.slopes_compensated, "flags": sc.flags})
    return {}


def _cmd_pole_scan(cfg, run):
    from .projector import pole_growth_scan

    prof = _profile(cfg)
    rep = pole_growth_scan(_table(cfg, prof), cfg["lambda_grid"])
    rows = [(w[0], w[1], v, a, ok) for w, v, a, ok in
            zip(rep["windows"], rep["max_pole_value"], rep["argmax_lambda"], rep["window_ok"])]
    run.csv("pole_scan.csv", ["window_lo", "window_hi", "max_pole_value", "argmax_lambda", "window_ok"], rows)
    run.json("pole_scan.json", {"exponent": rep["exponent"], "max_nonzero_k_pole": rep["max_nonzero_k_pole"]})
    return {}


def _cmd_sup_scan(cfg, run):
    from .projector import eigenfunction_sup_scan

    prof = _profile(cfg)
    rep = eigenfunction_sup_scan(_table(cfg, prof), cfg["eps"], cfg["lambda_grid"])
    rows = [(w[0], w[1], v, a["k"], a["l"], a["lambda"]) for w, v, a in
            zip(rep["windows"], rep["window_max"], rep["argmax"])]
    run.csv("sup_scan.csv", ["window_lo", "window_hi", "window_max", "k", "l", "lambda"], rows)
    run.json("sup_scan.json", {"exponent": rep["exponent"], "max_norm_deviation": rep["max_norm_deviation"]})
    return {}


def _cmd_verify_all(cfg, run):
    from .verify import CRITERIA, run_check

    nums = [int(n) for n in cfg["only"]] if cfg["only"] else list(CRITERIA)
    bad = [n for n in nums if n not in CRITERIA]
    if bad:
        raise ValidationError(f"unknown criteria {bad}")
    ctx, results = {}, []
    for n in nums:
        r = run_check(n, quick=cfg["quick"], seed=cfg["seed"], ctx=ctx)
        print(r.line(), flush=True)
        results.append(r)
    run.json("verify.json", {"surface": cfg["surface"], "results": [r.as_dict() for r in results]})
    return {"all_passed": all(r.passed for r in results)}


_COMMANDS = {
    "surface": _cmd_surface,
    "clairaut": _cmd_clairaut,
    "action-curve": _cmd_action_curve,
    "convexity": _cmd_convexity,
    "twist": _cmd_twist,
    "geodesic": _cmd_geodesic,
    "bichlen": _cmd_bichlen,
    "dmu": _cmd_dmu,
    "vdc": _cmd_vdc,
    "mixed-verify": _cmd_mixed,
    "eig": _cmd_eig,
    "weyl": _cmd_weyl,
    "projector": _cmd_projector,
    "pole-scan": _cmd_pole_scan,
    "sup-scan": _cmd_sup_scan,
    "verify-all": _cmd_verify_all,
}


def _versions() -> dict:
    import numba
    import scipy

    return {"revspec": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    code, message, summary = EXIT_OK, None, {}
    cfg = {}
    try:
        cfg = _resolve(args)
        np.random.seed(cfg["seed"])
        run = _Run(Path(cfg["out"]))
        summary = _COMMANDS[args.command](cfg, run) or {}
        if summary.get("all_passed") is False or summary.get("passed") is False:
            code = EXIT_VALIDATION
    except ValidationError as exc:
        code, message = EXIT_VALIDATION, str(exc)
    except NumericError as exc:
        code, message = EXIT_NUMERIC, str(exc)
    except RevspecError as exc:
        code, message = EXIT_NUMERIC, str(exc)
    if message:
        print(f"revspec {args.command}: error: {message}", file=sys.stderr)
    if cfg:
        manifest = {
            "command": args.command,
            "config": cfg,
            "versions": _versions(),
            "wall_time_s": time.perf_counter() - t0,
            "exit_code": code,
            "error": message,
            "artifacts": sorted(set(run.artifacts)) if "run" in locals() else [],
            "summary": summary,
        }
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        from .verify import _jsonable

        with open(out / "run.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
