"""
Command line interface: ``bekk-ergo <command> ...``.

Every command writes one JSON document to stdout (tool version, echoed
configuration, seed and model hash included) and a short human summary to
stderr unless ``--quiet`` is given.

Exit codes: 0 ok, 1 usage or I/O error, 2 model not stationary, 3 simulation
diverged.
"""
import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import example_names, get_example
from .diagnostics import convergence_probe, moment_check, orbit_dimension
from .drift import build_certificate, verify_drift
from .exceptions import BekkError, ModelError
from .matcore import unvech, vech
from .model import load_model, model_hash, model_to_dict, save_model
from .simulate import offstate_probe, parse_innovation, run
from .state import ChainState
from .stationarity import check_h3, rho_B

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONSTATIONARY = 2
EXIT_DIVERGED = 3
SEED_ENV = "BEKK_ERGO_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- helpers ------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


class Output:
    def __init__(self, quiet):
        self.quiet = quiet

    def say(self, text=""):
        if not self.quiet:
            print(text, file=sys.stderr)

    def warn(self, text):
        print(f"warning: {text}", file=sys.stderr)

    def emit(self, doc):
        json.dump(_jsonable(doc), sys.stdout, indent=2)
        sys.stdout.write("\n")


def _config(args):
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def _resolve_seed(args):
    """Explicit flag, then the environment variable, then fresh entropy (recorded)."""
    if getattr(args, "seed", None) is not None:
        return args.seed, "flag"
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env), "env"
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return int(np.random.SeedSequence().entropy), "entropy"


def _load(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise UsageError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except ModelError as exc:
        raise UsageError(f"{path}: field {exc.field!r}: {exc}") from None


def load_state(path):
    """
    Read a start state.  Accepted layouts::

        {"sigma_blocks": [[...vech...], ...], "x_blocks": [[...], ...]}
        {"sigmas": [[[...]...], ...], "xs": [[...], ...]}
    """
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"start file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if "sigma_blocks" in obj:
        return ChainState.from_dict(obj)
    if "sigmas" in obj:
        return ChainState.from_matrices(obj["sigmas"], obj["xs"])
    raise UsageError(f"{path}: expected keys 'sigma_blocks'/'x_blocks' or 'sigmas'/'xs'")


def _start(m, spec):
    if spec in (None, "T"):
        return "attracting_point"
    y = load_state(spec)
    y.check_model(m)
    return y


def _header(args, m, seed=None, seed_source=None):
    doc = {"tool": "bekk-ergo", "version": __version__, "command": args.command,
           "config": _config(args), "model_hash": model_hash(m)}
    if seed is not None:
        doc["seed"] = seed
        doc["seed_source"] = seed_source
    return doc


def _frac(x, max_den=10_000):
    return str(Fraction(x).limit_denominator(max_den))


# -- commands -----------------------------------------------------------------------

def cmd_check(args, out):
    m = _load(args.model)
    rep = check_h3(m, tol_margin=args.tol_margin)
    doc = _header(args, m)
    doc["report"] = rep.to_dict()
    out.emit(doc)
    out.say(f"rho(sum A + sum B) = {rep.rho_AB:.12g}")
    out.say(f"rho(sum B)         = {rep.rho_B:.12g}")
    out.say(f"stationary         = {rep.stationary}")
    if rep.Sigma is not None:
        out.say(f"Sigma              = {np.array2string(rep.Sigma, precision=6)}")
    return EXIT_OK if rep.stationary else EXIT_NONSTATIONARY


def _write_trajectory(traj, prefix, binary):
    vs, xs = traj.vech_sigmas, traj.xs
    times = np.arange(traj.t0, traj.t0 + xs.shape[0])
    if binary:
        path = Path(f"{prefix}.npz")
        np.savez(path, n=times, xs=xs, vech_sigmas=vs)
    else:
        path = Path(f"{prefix}.csv")
        d, h = xs.shape[1], vs.shape[1]
        header = ["n"] + [f"x_{i + 1}" for i in range(d)] + [f"vech_sigma_{k + 1}" for k in range(h)]
        table = np.column_stack([times, xs, vs])
        fmt = ["%d"] + ["%.17g"] * (d + h)
        np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt=fmt)
    return path


def cmd_simulate(args, out):
    m = _load(args.model)
    seed, source = _resolve_seed(args)
    innov = parse_innovation(args.innov)
    start = _start(m, args.start)
    probe = offstate_probe(m, start, horizon=args.probe_horizon) if rho_B(m) < 1.0 else None
    if probe is not None and probe.flagged:
        out.warn("start not on state-space variety: "
                 + json.dumps(_jsonable({k: probe.to_dict()[k] for k in
                                         ("coords", "fixed_values", "start_values", "persistent")})))
    traj = run(m, start, n=args.n, burn_in=args.burn_in, seed=seed, innov=innov,
               sqrt_mode=args.sqrt, warn=False)
    path = _write_trajectory(traj, args.out, args.binary)
    vs, xs = traj.post_burn_in()
    d = m.d
    summary = {}
    if xs.shape[0]:
        summary = {
            "mean_XXt": (xs.T @ xs / xs.shape[0]).tolist(),
            "mean_Sigma": unvech(vs.mean(axis=0)).tolist(),
        }
    doc = _header(args, m, seed, source)
    doc["trajectory"] = traj.metadata()
    doc["output"] = str(path)
    doc["summary"] = summary
    doc["off_state"] = None if probe is None else probe.to_dict()
    sidecar = Path(f"{args.out}.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")
    doc["sidecar"] = str(sidecar)
    out.emit(doc)
    out.say(f"wrote {xs.shape[0]} rows to {path} (sidecar {sidecar})")
    if summary:
        out.say(f"mean X X'   = {np.array2string(np.asarray(summary['mean_XXt']), precision=5)}")
        out.say(f"mean Sigma  = {np.array2string(np.asarray(summary['mean_Sigma']), precision=5)}")
    if traj.diverged:
        out.warn(f"simulation diverged after {traj.n_steps} steps (d={d}); output is partial")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_drift(args, out):
    m = _load(args.model)
    seed, source = _resolve_seed(args)
    rep = check_h3(m)
    doc = _header(args, m, seed, source)
    if not rep.stationary:
        doc["stationarity"] = rep.to_dict()
        out.emit(doc)
        out.say(f"rho_AB = {rep.rho_AB:.12g} >= 1: no drift certificate")
        return EXIT_NONSTATIONARY
    cert = build_certificate(m)
    ver = verify_drift(m, cert, n_path_states=args.path_states, n_random_states=args.random_states,
                       n_boundary_states=args.boundary_states, seed=seed, mc_states=args.mc_states,
                       mc_draws=args.mc_draws, threads=args.threads)
    doc["certificate"] = cert.to_dict()
    doc["rational"] = {"alpha0": _frac(cert.alpha0), "alpha": _frac(cert.alpha), "b": _frac(cert.b)}
    doc["verification"] = ver.to_dict()
    out.emit(doc)
    out.say(f"alpha0 = {cert.alpha0:.15g} (~{_frac(cert.alpha0)})")
    out.say(f"alpha  = {cert.alpha:.15g} (~{_frac(cert.alpha)})")
    out.say(f"b      = {cert.b:.15g} (~{_frac(cert.b)})")
    out.say(f"K = {{V <= {cert.K_level:.6g}}}; {ver.n_states} states checked, {ver.violations} violations")
    return EXIT_OK if ver.ok else EXIT_ERROR


def cmd_diagnose(args, out):
    m = _load(args.model)
    seed, source = _resolve_seed(args)
    rep = check_h3(m)
    doc = _header(args, m, seed, source)
    if not rep.stationary:
        doc["stationarity"] = rep.to_dict()
        out.emit(doc)
        out.say(f"rho_AB = {rep.rho_AB:.12g} >= 1: diagnostics need a stationary model")
        return EXIT_NONSTATIONARY
    which = set(args.which or ["convergence", "orbit", "moments"])
    ss = np.random.SeedSequence(seed)
    s_conv, s_orbit, s_mom = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
    code = EXIT_OK
    if "orbit" in which:
        od = orbit_dimension(m, n_samples=args.samples, depth=args.depth, seed=s_orbit,
                             rank_rtol=args.rank_rtol, threads=args.threads)
        doc["orbit"] = od.to_dict()
        out.say(f"orbit: linear rank {od.linear_rank} of {od.ambient_dim}, "
                f"quadratic rank {od.quadratic_rank} of {od.feature_dim}, degenerate = {od.degenerate}")
    if "convergence" in which:
        starts = [_start(m, s) for s in (args.start or ["T"])]
        cr = convergence_probe(m, starts, chains_per_start=args.chains, horizon=args.horizon,
                               seed=s_conv, metric=args.metric, n_reference=args.reference_chains,
                               reference_lag=args.reference_lag, threads=args.threads)
        doc["convergence"] = cr.to_dict()
        if args.csv:
            cr.to_csv(args.csv)
            doc["convergence_csv"] = args.csv
        for k, (fit, off) in enumerate(zip(cr.fits, cr.off_state)):
            rate = f"rate {fit['rate']:.4f}, R^2 {fit['r2']:.3f}" if fit["ok"] else fit["reason"]
            out.say(f"convergence start {k}: {rate}")
            if off["flagged"]:
                out.warn(f"start {k} not on state-space variety: coordinates {off['coords']} "
                         f"persistent offsets {off['persistent']}")
                atoms = [cr.coordinate_labels[i] for i in cr.atomic]
                tv = cr.per_coordinate[k][:, cr.atomic].min(axis=0) if cr.atomic else []
                out.say(f"  minimum total variation on atomic coordinates {atoms}: {list(tv)}")
    if "moments" in which:
        traj = run(m, n=args.n, burn_in=args.burn_in, seed=s_mom, warn=False)
        if traj.diverged:
            doc["moments"] = {"diverged": True, "n_steps": traj.n_steps}
            code = EXIT_DIVERGED
        else:
            mr = moment_check(traj, m)
            doc["moments"] = mr.to_dict()
            out.say(f"moments: max |z| = {mr.max_abs_z:.3f} over batches of {mr.batch_length} "
                    f"({'ok' if mr.ok else 'check'})")
    doc["sub_seeds"] = {"convergence": s_conv, "orbit": s_orbit, "moments": s_mom}
    out.emit(doc)
    return code


def cmd_convert(args, out):
    m = _load(args.model)
    doc = _header(args, m)
    if args.to == "vec":
        doc["form"] = "vec"
        doc["C"] = m.C.reshape(-1, order="F").tolist()
        doc["A"] = [M.tolist() for M in m.vec_form.Atilde]
        doc["B"] = [M.tolist() for M in m.vec_form.Btilde]
    else:
        doc["form"] = "vech"
        doc["C"] = vech(m.C).tolist()
        doc["A"] = [M.tolist() for M in m.vech_form.A]
        doc["B"] = [M.tolist() for M in m.vech_form.B]
    out.emit(doc)
    for name in ("A", "B"):
        for i, M in enumerate(doc[name]):
            out.say(f"{name}_{i + 1} =\n{np.array2string(np.asarray(M), precision=6)}")
    return EXIT_OK


def cmd_example(args, out):
    try:
        ex = get_example(args.name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    m = ex.model()
    model_path = outdir / f"{ex.name}.json"
    save_model(m, model_path)
    files = [str(model_path)]
    for key in ex.starts:
        p = outdir / f"{ex.name}.start-{key}.json"
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(ex.start(key).to_dict(), fh, indent=2)
            fh.write("\n")
        files.append(str(p))
    readme = outdir / f"{ex.name}.README.md"
    readme.write_text(ex.readme(), encoding="utf-8")
    files.append(str(readme))
    doc = _header(args, m)
    doc["example"] = {"name": ex.name, "title": ex.title, "note": ex.note}
    doc["model"] = model_to_dict(m)
    doc["files"] = files
    out.emit(doc)
    out.say(f"{ex.name}: {ex.title}")
    for f in files:
        out.say(f"  wrote {f}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="bekk-ergo", description="Stationarity, drift and ergodicity tools for BEKK GARCH models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--quiet", action="store_true", help="suppress the human summary on stderr")
    p.add_argument("--threads", type=int, default=1, help="maximum worker threads (default 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="stationarity check")
    c.add_argument("model")
    c.add_argument("--tol-margin", type=float, default=0.0)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="simulate a trajectory")
    s.add_argument("model")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--burn-in", type=int, default=0)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--start", default="T", help="'T' (attracting point) or a state JSON file")
    s.add_argument("--innov", default="gaussian", help="'gaussian' or 't:<dof>'")
    s.add_argument("--sqrt", choices=("psd", "cholesky"), default="psd")
    s.add_argument("--out", default="trajectory", help="output prefix (writes PREFIX.csv/.npz and PREFIX.json)")
    s.add_argument("--binary", action="store_true", help="write .npz instead of CSV")
    s.add_argument("--probe-horizon", type=int, default=10_000)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("drift", help="build and verify the drift certificate")
    d.add_argument("model")
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--path-states", type=int, default=1000)
    d.add_argument("--random-states", type=int, default=200)
    d.add_argument("--boundary-states", type=int, default=50)
    d.add_argument("--mc-states", type=int, default=0)
    d.add_argument("--mc-draws", type=int, default=100_000)
    d.set_defaults(func=cmd_drift)

    g = sub.add_parser("diagnose", help="convergence, orbit-dimension and moment diagnostics")
    g.add_argument("model")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--which", action="append", choices=("convergence", "orbit", "moments"))
    g.add_argument("--start", action="append", help="start state file or 'T' (repeatable)")
    g.add_argument("--chains", type=int, default=300, help="chains per start")
    g.add_argument("--horizon", type=int, default=50)
    g.add_argument("--metric", choices=("energy", "ks"), default="energy")
    g.add_argument("--reference-chains", type=int, default=1000)
    g.add_argument("--reference-lag", type=int, default=None)
    g.add_argument("--csv", default=None, help="write the distance curve as lag,start,distance CSV")
    g.add_argument("--samples", type=int, default=200, help="orbit samples")
    g.add_argument("--depth", type=int, default=20, help="orbit depth")
    g.add_argument("--rank-rtol", type=float, default=1e-8)
    g.add_argument("--n", type=int, default=100_000, help="moment-check length")
    g.add_argument("--burn-in", type=int, default=1000)
    g.set_defaults(func=cmd_diagnose)

    v = sub.add_parser("convert", help="print the vec or vech form")
    v.add_argument("model")
    v.add_argument("--to", choices=("vec", "vech"), required=True)
    v.set_defaults(func=cmd_convert)

    e = sub.add_parser("example", help="write a built-in example model")
    e.add_argument("name", help=f"one of {', '.join(example_names())}")
    e.add_argument("--out-dir", default=".")
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Output(args.quiet)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (BekkError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
