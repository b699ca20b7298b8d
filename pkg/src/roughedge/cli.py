"""Batch front end.

Subcommands
-----------
gen          sample and cache the sinogram for every configured eps
reconstruct  f_rec on the local patch for every eps
dtb          the DTB prediction on the local patch for every eps
sweep        remainder sweep with per-eps fields, aggregates and report
verify       kernel identities, profile certificates, model integrals
diag         angular Fourier-mode tables and exponential-sum aggregates

Exit codes
----------
0 success, 1 unexpected error, 2 configuration invalid, 3 accuracy
certificate failed, 4 grid coverage, 5 genericity screening, 6 output
directory locked by another run, 7 cache integrity.

Every failure writes ``failure.json`` (when the output directory is usable)
with the exit code, error type, message and any structured record.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__, report
from .config import load_config
from .errors import (AccuracyFailure, CacheIntegrityError, ConfigError, GenericityFailure,
                     GridCoverageError, QuadratureFailure, RoughEdgeError)

log = logging.getLogger("roughedge")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ACCURACY = 3
EXIT_COVERAGE = 4
EXIT_GENERICITY = 5
EXIT_LOCKED = 6
EXIT_CACHE = 7

_EXIT_FOR = [
    (ConfigError, EXIT_CONFIG),
    (AccuracyFailure, EXIT_ACCURACY),
    (QuadratureFailure, EXIT_ACCURACY),
    (GridCoverageError, EXIT_COVERAGE),
    (GenericityFailure, EXIT_GENERICITY),
    (CacheIntegrityError, EXIT_CACHE),
]

# certificate name -> tolerance; a run passes when every measured value is <= its tolerance
CERT_TOL = {
    "psi_certificate": 1e-8,
    "dtb_radon_residual": 1e-6,
    "dtb_mass_error": 1e-6,
}


class LockBusy(RoughEdgeError):
    pass


class OutputLock:
    """Exclusive ownership of an output directory through an ``O_EXCL`` lock file."""

    def __init__(self, directory):
        self.path = os.path.join(directory, ".roughedge.lock")
        self._fd = None

    def __enter__(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockBusy(f"{self.path} exists: another run owns this directory "
                           "(remove the file if that run is gone)") from None
        os.write(self._fd, f"{os.getpid()}\n".encode())
        return self

    def __exit__(self, *exc):
        os.close(self._fd)
        os.unlink(self.path)
        return False


# -- shared setup -------------------------------------------------------------

class Context:
    """Everything built from a validated configuration, created lazily."""

    def __init__(self, cfg, out, cache_dir):
        self.cfg = cfg
        self.out = out
        self.cache_dir = cache_dir
        self._ks = None
        self._phantom = None
        self._point = None
        self.timings = {}

    @property
    def ks(self):
        if self._ks is None:
            from .kernels import build_kernels, check_degrees

            k = self.cfg["kernel"]
            path = None
            if self.cache_dir:
                d, n = check_degrees(k["beta"], k["aperture_degree"], k["interp_degree"])
                tag = f"n{n}_d{d}_q{k['q_tab']:g}_s{1 / k['psi_step']:g}_{1 / k['dtb_step']:g}"
                path = os.path.join(self.cache_dir, f"kernels_{tag}.bin")
            t0 = time.perf_counter()
            self._ks = build_kernels(k["beta"], k["aperture_degree"], k["interp_degree"], k["q_tab"],
                                     k["psi_step"], k["dtb_step"], cache=path)
            self.timings["kernels"] = time.perf_counter() - t0
        return self._ks

    @property
    def phantom(self):
        if self._phantom is None:
            from .perturbation import PerturbationProfile
            from .phantom import BaseCurve, Phantom

            ph = self.cfg["phantom"]
            curve = BaseCurve(tuple(ph["center"]), ph["radius"], ph["arc_halfwidth"])
            self._phantom = Phantom(curve, PerturbationProfile.from_config(self.cfg["profile"]), ph["jump"])
        return self._phantom

    @property
    def point(self):
        if self._point is None:
            from .numtheory import screen_generic
            from .phantom import GOLDEN, CaseLabel, EvalPoint, curve_tangent, select_point

            p = self.cfg["point"]
            kappa = self.cfg["grid"]["kappa"]
            if p["x0"] is None:
                self._point = select_point(self.phantom, p["case"], kappa=kappa, M=p["M"],
                                           eta_max=p["eta_max"])
            else:
                x0 = (float(p["x0"][0]), float(p["x0"][1]))
                case = CaseLabel.parse(p["case"])
                norm = math.hypot(*x0)
                if norm == 0:
                    raise GenericityFailure("x0 at the origin has no defined direction", condition="3")
                kap = GOLDEN / norm if kappa == "auto" else float(kappa)
                tangent = curve_tangent(self.phantom.curve, 0.0) if case is CaseLabel.A_onS else None
                record = screen_generic(x0, kap, tangent, M=p["M"], curve=self.phantom.curve,
                                        eta_max=p["eta_max"])
                self._point = EvalPoint(x0, case, kap, record)
        return self._point

    def grid(self, eps):
        from .sinogram import make_grid

        g = self.cfg["grid"]
        return make_grid(self.phantom, eps, self.point.kappa, self.ks.aperture,
                         p_bar=g["p_bar"], alpha_bar=g["alpha_bar"], mode=g["mode"])

    def sinogram_path(self, index):
        return os.path.join(self.cache_dir, f"sinogram_{index:02d}.bin") if self.cache_dir else None

    def sinogram(self, index, eps):
        """Sinogram for ``eps``: from the cache when its provenance matches, else sampled (and cached)."""
        from .sinogram import _provenance, read_sinogram, sample_data, write_sinogram

        grid = self.grid(eps)
        mode = self.cfg["grid"]["mode"]
        path = self.sinogram_path(index)
        want = _provenance(self.phantom, grid, self.ks.aperture, mode)["hash"]
        if path and os.path.exists(path):
            sino = read_sinogram(path)
            if sino.provenance.get("hash") == want:
                return sino
        t0 = time.perf_counter()
        sino = sample_data(self.phantom, grid, self.ks.aperture, mode=mode)
        self.timings[f"sample_{index:02d}"] = time.perf_counter() - t0
        if path:
            write_sinogram(path, sino)
        return sino

    def patch(self, eps):
        from .reconstruct import LocalPatch

        pt = self.cfg["patch"]
        return LocalPatch(self.point.x0, eps, pt["box"], pt["step"])

    def certificates(self):
        ks = self.ks
        measured = {
            "psi_certificate": ks.filtered.certificate,
            "dtb_radon_residual": ks.dtb.radon_residual,
            "dtb_mass_error": abs(ks.dtb.mass - 1.0),
        }
        return {k: {"measured": v, "tolerance": CERT_TOL[k], "passed": bool(v <= CERT_TOL[k])}
                for k, v in measured.items()}

    def header(self, command):
        return {
            "command": command,
            "version": __version__,
            "config": self.cfg.echo(),
            "seed": self.cfg["seed"],
        }


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _outputs(paths):
    return {os.path.basename(p): _sha256(p) for p in paths}


def _eps_list(ctx):
    return [float(e) for e in ctx.cfg["grid"]["eps"]]


def _patch_rows(ctx, eps, values):
    xc = ctx.patch(eps).grid()
    x0 = ctx.point.x0
    return [(eps, a, b, x0[0] + eps * a, x0[1] + eps * b, v) for (a, b), v in zip(xc, values)]


# -- subcommands --------------------------------------------------------------

def cmd_gen(ctx):
    files = []
    entries = []
    for i, eps in enumerate(_eps_list(ctx)):
        sino = ctx.sinogram(i, eps)
        path = ctx.sinogram_path(i)
        with open(path + ".json") as fh:
            man = json.load(fh)
        entries.append({"file": os.path.basename(path), "eps": eps, "sha256": man["sha256"],
                        "exact_zero": man["exact_zero"], "shape": [sino.grid.nk, sino.grid.nj]})
        files.append(path)
        log.info("eps=%.6g  %d x %d  exact_zero=%s", eps, sino.grid.nk, sino.grid.nj, man["exact_zero"])
    manifest = os.path.join(ctx.cache_dir, "manifest.json")
    report.write_json(manifest, {"version": __version__, "config": ctx.cfg.echo(), "sinograms": entries,
                                 "exact_zero": all(e["exact_zero"] for e in entries)})
    payload = ctx.header("gen")
    payload.update(genericity=ctx.point.genericity, x0=ctx.point.x0, kappa=ctx.point.kappa,
                   manifest=manifest, timings=ctx.timings)
    report.write_json(os.path.join(ctx.out, "report.json"), payload)
    return EXIT_OK


def _field_command(ctx, name):
    from .kernels import dtb_predict
    from .reconstruct import reconstruct_points

    rows = []
    for i, eps in enumerate(_eps_list(ctx)):
        patch = ctx.patch(eps)
        t0 = time.perf_counter()
        if name == "reconstruct":
            vals = reconstruct_points(ctx.sinogram(i, eps), ctx.ks, patch.points())
        else:
            vals = dtb_predict(ctx.ks, ctx.phantom, patch.x0, patch.grid(), eps)
        ctx.timings[f"{name}_{i:02d}"] = time.perf_counter() - t0
        rows += _patch_rows(ctx, eps, vals)
        log.info("eps=%.6g  max|%s|=%.6g", eps, name, float(np.max(np.abs(vals))))
    col = "f_rec" if name == "reconstruct" else "dtb"
    path = report.write_csv(os.path.join(ctx.out, f"{name}.csv"), report.FIELD_HEADER[:5] + (col,), rows)
    payload = ctx.header(name)
    payload.update(genericity=ctx.point.genericity, x0=ctx.point.x0, kappa=ctx.point.kappa,
                   certificates=ctx.certificates(), outputs=_outputs([path]), timings=ctx.timings)
    report.write_json(os.path.join(ctx.out, "report.json"), payload)
    return EXIT_OK if all(c["passed"] for c in payload["certificates"].values()) else EXIT_ACCURACY


def cmd_reconstruct(ctx):
    return _field_command(ctx, "reconstruct")


def cmd_dtb(ctx):
    return _field_command(ctx, "dtb")


def _diag_callback(ctx):
    from .numtheory import diagnostic_sums

    M = ctx.cfg["diagnostics"]["M"]

    def run(eps, sino):
        t0 = time.perf_counter()
        d = diagnostic_sums(ctx.phantom, ctx.ks, ctx.point.x0, sino.grid, M=M)
        ctx.timings[f"diagnostics_{eps:.6g}"] = time.perf_counter() - t0
        return {"M": d.M, "S_I": d.S_I, "S_II": d.S_II}

    return run


def cmd_sweep(ctx):
    from .reconstruct import LocalPatch, SweepRecord, SweepReport, loglog_slope, remainder_field, scaling_ratio

    cfg = ctx.cfg
    eps_list = _eps_list(ctx)
    diag = _diag_callback(ctx) if cfg["diagnostics"]["enabled"] else None
    pt = cfg["patch"]
    records = []
    for i, eps in enumerate(eps_list):
        t0 = time.perf_counter()
        sino = ctx.sinogram(i, eps)
        fld = remainder_field(ctx.phantom, sino, ctx.ks, LocalPatch(ctx.point.x0, eps, pt["box"], pt["step"]))
        extra = diag(eps, sino) if diag else {}
        sups = [r.sup_norm for r in records] + [fld.sup_norm]
        rec = SweepRecord(eps, fld.sup_norm, scaling_ratio(fld.sup_norm, eps),
                          loglog_slope(eps_list[: i + 1], sups) if i else None,
                          float(np.max(np.abs(fld.dtb))), float(np.max(np.abs(fld.f_rec))),
                          time.perf_counter() - t0, fld, extra)
        records.append(rec)
        log.info("eps=%.6g  sup=%.6g  r=%.6g  %s  (%.1fs)", eps, rec.sup_norm, rec.ratio,
                 " ".join(f"{k}={v:.6g}" for k, v in extra.items()), rec.seconds)
    ratios = [r.ratio for r in records]
    rep = SweepReport(records, loglog_slope(eps_list, [r.sup_norm for r in records]) if len(records) > 1 else None,
                      max(ratios) / min(ratios) if min(ratios) > 0 else None, ctx.point,
                      {"echo": cfg.echo()}, __version__)

    paths = [report.write_csv(os.path.join(ctx.out, "sweep_summary.csv"), report.SWEEP_HEADER,
                              report.sweep_rows(rep))]
    for i, r in enumerate(records):
        paths.append(report.write_csv(os.path.join(ctx.out, f"remainder_{i:02d}.csv"), report.FIELD_HEADER,
                                      report.field_rows([r.field], ctx.point.x0)))
    agg = {}
    if diag:
        norm = [math.sqrt(e) * math.log(1 / e) for e in eps_list]
        rows = [(r.eps, r.diagnostics["M"], r.diagnostics["S_I"], r.diagnostics["S_II"],
                 r.diagnostics["S_I"] / n, r.diagnostics["S_II"] / n) for r, n in zip(records, norm)]
        paths.append(report.write_csv(os.path.join(ctx.out, "diagnostics.csv"),
                                      ("eps", "M", "S_I", "S_II", "S_I_ratio", "S_II_ratio"), rows))
        for name, col in (("S_I", 4), ("S_II", 5)):
            vals = [row[col] for row in rows]
            agg[f"{name}_ratio_spread"] = max(vals) / min(vals) if min(vals) > 0 else None
    figures = []
    if cfg["figures"]:
        figures.append(report.sweep_figure(rep, os.path.join(ctx.out, "sweep.png")))
        figures.append(report.field_figure(records[-1].field, os.path.join(ctx.out, "remainder_last.png")))
        if diag:
            figures.append(report.diagnostics_figure(eps_list, [r.diagnostics["S_I"] for r in records],
                                                     [r.diagnostics["S_II"] for r in records],
                                                     os.path.join(ctx.out, "diagnostics.png")))
    certs = ctx.certificates()
    nonzero = ctx.phantom.profile.sup_bound > 0
    finite = all(math.isfinite(r) for r in ratios)
    certs["ratios_finite"] = {"measured": float(finite), "tolerance": None, "passed": bool(finite or not nonzero)}
    payload = ctx.header("sweep")
    payload.update(
        genericity=ctx.point.genericity, x0=ctx.point.x0, case=ctx.point.case_label.name, kappa=ctx.point.kappa,
        kernels=ctx.ks.describe(), certificates=certs, slope=rep.slope, ratio_spread=rep.ratio_spread,
        exact_zero=rep.exact_zero, aggregates=agg,
        records=[{"eps": r.eps, "sup_norm": r.sup_norm, "ratio": r.ratio, "slope_so_far": r.slope_so_far,
                  "dtb_max": r.dtb_max, "rec_max": r.rec_max, "seconds": r.seconds, **r.diagnostics}
                 for r in records],
        outputs=_outputs(paths), figures=[os.path.basename(f) for f in figures], timings=ctx.timings)
    report.write_json(os.path.join(ctx.out, "report.json"), payload)
    return EXIT_OK if all(c["passed"] for c in certs.values()) else EXIT_ACCURACY


def verify_checks(ctx, rng):
    """List of ``(check, measured, tolerance, passed, gating)`` rows."""
    from .kernels import decay_constants, eval_psi, exactness_sums, tail_check
    from .numtheory import family_spread, model_integral_suite
    from .perturbation import total_variation

    ks = ctx.ks
    rows = []

    def add(name, measured, tol, gating=True):
        rows.append((name, float(measured), tol, bool(measured <= tol), gating))

    u = rng.uniform(-8.0, 8.0, 1000)
    s0, s1 = exactness_sums(ks.interp, u)
    add("exactness_sum0", np.max(np.abs(s0 - 1.0)), 1e-12)
    add("exactness_sum1", np.max(np.abs(s1 - u)), 1e-12)
    W = ks.aperture.pp.antiderivative()
    L = ks.aperture.support_radius
    add("aperture_mass", abs(float(W(L + 1.0)) - float(W(-L - 1.0)) - 1.0), 1e-12)
    qs = rng.uniform(-3.0, 3.0, 50)
    ts = rng.uniform(-6.0, 6.0, 50)
    add("psi_periodicity", max(abs(eval_psi(ks, q + 1.0, t) - eval_psi(ks, q, t)) for q, t in zip(qs, ts)), 1e-10)
    add("dtb_radon_residual", ks.dtb.radon_residual, 1e-6)
    add("dtb_mass_error", abs(ks.dtb.mass - 1.0), 1e-6)
    add("psi_table_certificate", ks.filtered.certificate, 1e-8)
    add("psi_tail_check", tail_check(ks.filtered), 1e-3)
    # informational: the per-mode decay constants are reported, not gated (see README)
    _, C = decay_constants(ks)
    add("fourier_decay_spread", C.max() / C.min(), 10.0, gating=False)

    prof = ctx.phantom.profile
    worst_tv = 0.0
    for _ in range(8):
        a = rng.uniform(-20.0, 20.0)
        b = a + rng.uniform(0.1, 10.0)
        worst_tv = max(worst_tv, total_variation(prof, a, b) - prof.tv_rate * (b - a))
    add("profile_tv_excess", worst_tv, 1e-12)
    uu = rng.uniform(-50.0, 50.0, 2000)
    add("profile_sup_excess", max(0.0, float(np.max(np.abs(prof.h0(uu)))) - prof.sup_bound), 1e-12)

    dg = ctx.cfg["diagnostics"]
    model = model_integral_suite(dg["model_eps"], dg["model_alpha"])
    for (fam, case), spread in sorted(family_spread(model).items()):
        add(f"model_{fam}" + ("" if case == "-" else f"_{case}"), spread, 10.0)
    return rows, model


def cmd_verify(ctx):
    rng = np.random.default_rng(ctx.cfg["seed"])
    rows, model = verify_checks(ctx, rng)
    paths = [report.write_csv(os.path.join(ctx.out, "verify.csv"),
                              ("check", "measured", "tolerance", "passed", "gating"), rows),
             report.write_csv(os.path.join(ctx.out, "model_integrals.csv"),
                              ("family", "case", "eps", "alpha", "value", "bound", "ratio"),
                              [(r.family, r.case, r.eps, r.alpha, r.value, r.bound, r.ratio) for r in model])]
    for name, measured, tol, ok, gating in rows:
        log.info("%-24s %-5s %.3e (tol %g)%s", name, "PASS" if ok else "FAIL", measured, tol,
                 "" if gating else "  [informational]")
    payload = ctx.header("verify")
    payload.update(checks=[dict(zip(("check", "measured", "tolerance", "passed", "gating"), r)) for r in rows],
                   outputs=_outputs(paths), timings=ctx.timings)
    report.write_json(os.path.join(ctx.out, "report.json"), payload)
    return EXIT_OK if all(ok for _, _, _, ok, gating in rows if gating) else EXIT_ACCURACY


def cmd_diag(ctx):
    from .numtheory import diagnostic_sums

    M = ctx.cfg["diagnostics"]["M"]
    table, summary = [], []
    for i, eps in enumerate(_eps_list(ctx)):
        t0 = time.perf_counter()
        d = diagnostic_sums(ctx.phantom, ctx.ks, ctx.point.x0, ctx.grid(eps), M=M)
        ctx.timings[f"diag_{i:02d}"] = time.perf_counter() - t0
        for k, al in enumerate(d.alphas):
            for m in range(d.M + 1):
                table.append((eps, k, al, m, d.A[k, m].real, d.A[k, m].imag))
        n = math.sqrt(eps) * math.log(1 / eps)
        summary.append((eps, d.M, d.S_I, d.S_II, d.S_I / n, d.S_II / n))
        log.info("eps=%.6g  M=%d  S_I=%.6g  S_II=%.6g", eps, d.M, d.S_I, d.S_II)
    paths = [report.write_csv(os.path.join(ctx.out, "am_table.csv"), ("eps", "k", "alpha", "m", "re", "im"), table),
             report.write_csv(os.path.join(ctx.out, "diagnostics.csv"),
                              ("eps", "M", "S_I", "S_II", "S_I_ratio", "S_II_ratio"), summary)]
    if ctx.cfg["figures"]:
        report.diagnostics_figure([s[0] for s in summary], [s[2] for s in summary], [s[3] for s in summary],
                                  os.path.join(ctx.out, "diagnostics.png"))
    payload = ctx.header("diag")
    payload.update(genericity=ctx.point.genericity, x0=ctx.point.x0, kappa=ctx.point.kappa,
                   outputs=_outputs(paths), timings=ctx.timings)
    report.write_json(os.path.join(ctx.out, "report.json"), payload)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "reconstruct": cmd_reconstruct, "dtb": cmd_dtb, "sweep": cmd_sweep,
            "verify": cmd_verify, "diag": cmd_diag}


def build_parser():
    parser = argparse.ArgumentParser(prog="roughedge", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    table = __doc__.split("-----------\n")[1].split("\n\n")[0].splitlines()
    summaries = dict(line.split(None, 1) for line in table)
    for name in COMMANDS:
        p = sub.add_parser(name, help=summaries[name], description=summaries[name])
        p.add_argument("--config", metavar="PATH", help="YAML configuration (defaults when omitted)")
        p.add_argument("--out", metavar="DIR", default="roughedge-out", help="output directory")
        p.add_argument("--threads", type=int, metavar="N", help="numba worker threads")
        p.add_argument("--cache", metavar="DIR", help="kernel and sinogram cache directory "
                       "(gen defaults to OUT/cache)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--quiet", action="store_true", help="log warnings only")
    return parser


def _exit_code(exc):
    for cls, code in _EXIT_FOR:
        if isinstance(exc, cls):
            return code
    return EXIT_ERROR


def _failure(out, command, code, exc):
    rec = {"command": command, "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    for attr in ("key", "condition", "record"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    if out and os.path.isdir(out):
        report.write_json(os.path.join(out, "failure.json"), rec)
    print(json.dumps(report._jsonable(rec), sort_keys=True), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    overrides = {"seed": args.seed} if args.seed is not None else None
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        _failure(None, args.command, EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except OSError as exc:
        _failure(None, args.command, EXIT_CONFIG, ConfigError(str(exc), "--config"))
        return EXIT_CONFIG
    if args.threads is not None:
        import numba

        if not 1 <= args.threads <= numba.config.NUMBA_NUM_THREADS:
            exc = ConfigError(f"must lie in [1, {numba.config.NUMBA_NUM_THREADS}]", "--threads")
            _failure(None, args.command, EXIT_CONFIG, exc)
            return EXIT_CONFIG
        numba.set_num_threads(args.threads)
    out = report.ensure_dir(args.out)
    cache = args.cache or (os.path.join(out, "cache") if args.command == "gen" else None)
    if cache:
        report.ensure_dir(cache)
    try:
        with OutputLock(out):
            with open(os.path.join(out, "config.yaml"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(cfg.echo())
            stale = os.path.join(out, "failure.json")
            if os.path.exists(stale):
                os.unlink(stale)
            try:
                return COMMANDS[args.command](Context(cfg, out, cache))
            except Exception as exc:  # noqa: BLE001 - every failure gets a record and an exit code
                code = _exit_code(exc)
                if code == EXIT_ERROR:
                    log.exception("unexpected error")
                _failure(out, args.command, code, exc)
                return code
    except LockBusy as exc:
        _failure(None, args.command, EXIT_LOCKED, exc)
        return EXIT_LOCKED


if __name__ == "__main__":
    sys.exit(main())
