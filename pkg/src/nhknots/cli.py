"""Command-line driver.

Every command takes ``--config FILE`` (flat key = value) and repeated
``--set key=value`` overrides. Exit codes: 0 success, 1 computation error
at a requested point, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import braid, io, manybody, spectral, svg, topology
from .errors import ConfigError, NHKnotsError
from .lattice import symmetry_residuals
from .parallel import resolve_workers

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2
MIN_N_K = 64


def _workers(cfg: io.RunConfig) -> int:
    try:
        return resolve_workers(cfg["workers"])
    except ValueError as exc:
        raise ConfigError(f"bad worker count: {exc}") from None


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _manifest(cfg, command):
    return io.OutputManifest(command, cfg.to_dict(), io.default_out_dir(cfg))


def _timed(manifest, key, func, *args, **kwargs):
    t0 = time.perf_counter()
    out = func(*args, **kwargs)
    manifest.timings[key] = round(time.perf_counter() - t0, 6)
    return out


def _cuts(cfg, sites: int) -> list[int]:
    if cfg["cuts"] in (None, "", "auto"):
        # up to 24 cuts across the fit window, on unit-cell boundaries so the
        # cut always severs the same inter-cell bond
        cells = np.linspace(sites / 64, 15 * sites / 64, 24).round().astype(int)
        return sorted(set((4 * cells).tolist()))
    return cfg.int_list("cuts")


# -- commands -----------------------------------------------------------------


def cmd_symcheck(cfg: io.RunConfig) -> int:
    params = cfg.model()
    rep = symmetry_residuals(params, cfg["k_samples"])
    tol = 1e-12
    rows = [("PHS", rep.phs, True), ("T", rep.t_sym, rep.t_gamma_applicable), ("Gamma", rep.gamma, rep.t_gamma_applicable)]
    print(f"{'symmetry':<10}{'residual':>14}  status")
    for name, val, applicable in rows:
        status = ("pass" if val < tol else "FAIL") if applicable else "not applicable (t1 != t3)"
        print(f"{name:<10}{val:>14.3e}  {status}")
    return EXIT_OK if rep.passes(tol) else EXIT_COMPUTE


def _strings(cfg, manifest):
    _require(cfg["n_k"] >= MIN_N_K, f"n_k must be >= {MIN_N_K}, got {cfg['n_k']}")
    strings = _timed(manifest, "track_bands_s", spectral.track_bands, cfg.model(), cfg["n_k"])
    manifest.write_text("spectrum.csv", io.spectrum_csv(strings))
    return strings


def cmd_spectrum(cfg: io.RunConfig) -> int:
    manifest = _manifest(cfg, "spectrum")
    strings = _strings(cfg, manifest)
    if cfg["svg"]:
        series = {f"Re E{i + 1}": (strings.k_grid, strings.bands[:, i].real) for i in range(strings.n_bands)}
        manifest.write_text("spectrum.svg", svg.line_plot(series, "k", "Re E"))
    manifest.finish()
    print(f"tracked {strings.n_bands} bands on {len(strings.k_grid)} k points; endpoint permutation {strings.endpoint_permutation}")
    return EXIT_OK


def cmd_braid(cfg: io.RunConfig) -> int:
    manifest = _manifest(cfg, "braid")
    strings = _strings(cfg, manifest)
    word = _timed(manifest, "extract_braid_s", braid.extract_braid, strings, cfg["theta"])
    inv = braid.linking_invariants(word)
    cls = braid.classify_knot(inv)
    manifest.write_text("braid.braid", word.tokens() + "\n")
    manifest.write_text("knot.json", braid.braid_summary_json(word, inv, cls) + "\n")
    manifest.finish()
    print(f"braid: {word.tokens() or '(empty)'}")
    print(f"knot class: {cls.label}")
    return EXIT_OK


def cmd_winding(cfg: io.RunConfig) -> int:
    _require(cfg["n_k"] >= 256, f"n_k must be >= 256 for the winding number, got {cfg['n_k']}")
    params = cfg.model()
    res = topology.winding_number(params, cfg["n_k"])
    manifest = _manifest(cfg, "winding")
    manifest.write_json("winding.json", {"w": res.w, "w_raw": res.w_raw, "min_abs_f": res.min_abs_f, "n_k_used": res.n_k_used})
    manifest.finish()
    print(f"w = {res.w}  (raw {res.w_raw:.6f}, min|f| = {res.min_abs_f:.3e})")
    return EXIT_OK


def cmd_boundaries(cfg: io.RunConfig) -> int:
    params = cfg.model()
    roots = topology.phase_boundary_lambdas(params)
    manifest = _manifest(cfg, "boundaries")
    manifest.write_text("boundaries.csv", io.csv_text(["lambda"], [[r] for r in roots.lambdas]))
    t2s = np.linspace(cfg["t2_min"], cfg["t2_max"], 4 * cfg["t2_resolution"] + 1)
    curves = topology.boundary_curves(params, t2s)
    rows = [[sign, p, t2, lam] for (sign, p), pts in sorted(curves.items()) for t2, lam in pts]
    manifest.write_text("boundary_curves.csv", io.csv_text(["sign", "p", "t2", "lambda"], rows))
    manifest.finish()
    for r in roots.lambdas:
        print(f"{r:.6f}")
    return EXIT_OK


def cmd_phase_diagram(cfg: io.RunConfig) -> int:
    _require(cfg["n_k"] >= 256, f"n_k must be >= 256, got {cfg['n_k']}")
    _require(min(cfg["lambda_resolution"], cfg["t2_resolution"]) >= 16, "resolution must be >= 16 per axis")
    base = cfg.model()
    manifest = _manifest(cfg, "phase-diagram")
    grid = _timed(
        manifest,
        "sweep_s",
        topology.sweep_phase_diagram,
        base,
        (cfg["lambda_min"], cfg["lambda_max"]),
        (cfg["t2_min"], cfg["t2_max"]),
        (cfg["lambda_resolution"], cfg["t2_resolution"]),
        cfg["n_k"],
        cfg["with_knots"],
        _workers(cfg),
    )
    manifest.write_text("phase_diagram.csv", io.grid_csv(grid))
    manifest.write_json("phase_diagram.json", grid.metadata)
    if cfg["svg"]:
        curves = topology.boundary_curves(base, np.linspace(cfg["t2_min"], cfg["t2_max"], 400))
        manifest.write_text("phase_diagram.svg", svg.heatmap(grid, dict(curves.items()), "winding number"))
        manifest.extra["color_scale"] = svg.COLOR_SCALE_DOC["winding"]
    manifest.finish()
    values = sorted(int(v) for v in np.unique(grid.values[~grid.flags]))
    print(f"winding values {values}; {grid.n_regions()} connected regions; {int(grid.flags.sum())} flagged cells")
    return EXIT_OK


def _entropy_cut(cfg, manifest):
    sites = cfg["sites"]
    cuts = _cuts(cfg, sites)
    _require(min(cuts) >= 1 and max(cuts) <= sites - 1, f"cuts must lie in [1, {sites - 1}]")
    curve = _timed(manifest, "entropy_vs_cut_s", manybody.entropy_vs_cut, cfg.model(), sites, cuts)
    manifest.write_text("entropy_cut.csv", io.entropy_csv(curve))
    return curve


def _entropy_size(cfg, manifest):
    sizes = cfg.int_list("sizes")
    _require(all(s >= 8 and s % 4 == 0 for s in sizes), "sizes must be multiples of 4 and >= 8")
    curve = _timed(manifest, "entropy_vs_size_s", manybody.entropy_vs_size, cfg.model(), sizes)
    manifest.write_text("entropy_size.csv", io.entropy_csv(curve))
    return curve


def _fit_dict(fit: manybody.FitResult) -> dict:
    return {
        "c": fit.c,
        "c_stderr": fit.c_stderr,
        "intercept": fit.intercept,
        "rms_residual": fit.rms_residual,
        "window": list(fit.window),
        "n_points": fit.n_points,
        "poor_fit": fit.poor_fit,
    }


def cmd_ee_cut(cfg: io.RunConfig) -> int:
    manifest = _manifest(cfg, "ee-cut")
    curve = _entropy_cut(cfg, manifest)
    if cfg["svg"]:
        manifest.write_text("entropy_cut.svg", svg.line_plot({"S": (curve.abscissa, curve.entropy)}, "L_A", "S"))
    manifest.finish()
    for a, s in zip(curve.abscissa, curve.entropy):
        print(f"{a:6d}  {s:.10f}")
    return EXIT_OK


def cmd_ee_size(cfg: io.RunConfig) -> int:
    manifest = _manifest(cfg, "ee-size")
    curve = _entropy_size(cfg, manifest)
    if cfg["svg"]:
        manifest.write_text("entropy_size.svg", svg.line_plot({"S": (curve.abscissa, curve.entropy)}, "L", "S", logx=True))
    manifest.finish()
    for a, s in zip(curve.abscissa, curve.entropy):
        print(f"{a:6d}  {s:.10f}")
    return EXIT_OK


def cmd_cfit(cfg: io.RunConfig) -> int:
    manifest = _manifest(cfg, "cfit")
    cut_curve = _entropy_cut(cfg, manifest)
    size_curve = _entropy_size(cfg, manifest)
    try:
        cc = manybody.fit_cardy_calabrese(cut_curve, cfg["sites"])
        ls = manybody.fit_log_scaling(size_curve.abscissa, size_curve.entropy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rel = abs(cc.c - ls.c) / max(abs(cc.c), abs(ls.c), 1e-300)
    manifest.write_json("cfit.json", {"cardy_calabrese": _fit_dict(cc), "log_scaling": _fit_dict(ls), "relative_difference": rel})
    if cfg["svg"]:
        x = manybody.chord_log(cfg["sites"], cut_curve.abscissa)
        series = {"S vs chord log": (x, cut_curve.entropy), "S(L/2) vs log L": (np.log(size_curve.abscissa), size_curve.entropy)}
        manifest.write_text("cfit.svg", svg.line_plot(series, "log length", "S"))
    manifest.finish()
    print(f"c (cut fit)  = {cc.c:.6f} +- {cc.c_stderr:.2e}")
    print(f"c (size fit) = {ls.c:.6f} +- {ls.c_stderr:.2e}")
    print(f"relative difference {rel:.3%}")
    return EXIT_OK


def cmd_fidelity(cfg: io.RunConfig) -> int:
    _require(cfg["eps"] > 0, "eps must be > 0")
    res = manybody.fidelity(cfg.model(), cfg["sites"], cfg["eps"])
    manifest = _manifest(cfg, "fidelity")
    payload = {
        "lambda": res.lam,
        "eps": res.eps,
        "F_re": res.F.real,
        "F_im": res.F.imag,
        "chi_re": res.chi.real,
        "chi_im": res.chi.imag,
        "abs_chi": abs(res.chi),
        "log1p_abs_chi_clipped": float(manybody.clip_chi(abs(res.chi), cfg["clip"])),
    }
    manifest.write_json("fidelity.json", payload)
    manifest.finish()
    print(f"F = {res.F.real:.12g} {res.F.imag:+.3e}j   |chi| = {abs(res.chi):.6g}")
    return EXIT_OK


def cmd_fidelity_scan(cfg: io.RunConfig) -> int:
    _require(cfg["eps"] > 0, "eps must be > 0")
    base = cfg.model()
    manifest = _manifest(cfg, "fidelity-scan")
    grid = _timed(
        manifest,
        "scan_s",
        manybody.fidelity_scan,
        base,
        (cfg["lambda_min"], cfg["lambda_max"]),
        (cfg["t2_min"], cfg["t2_max"]),
        (cfg["lambda_resolution"], cfg["t2_resolution"]),
        cfg["sites"],
        cfg["eps"],
        cfg["clip"],
        _workers(cfg),
    )
    manifest.write_text("fidelity_scan.csv", io.grid_csv(grid))
    manifest.write_json("fidelity_scan.json", grid.metadata)
    if cfg["svg"]:
        curves = topology.boundary_curves(base, np.linspace(cfg["t2_min"], cfg["t2_max"], 400))
        manifest.write_text("fidelity_scan.svg", svg.heatmap(grid, dict(curves.items()), "log(1 + |chi|)"))
        manifest.extra["color_scale"] = svg.COLOR_SCALE_DOC["continuous"]
    manifest.finish()
    print(f"max log(1+|chi|) = {grid.values.max():.4f}; {int(grid.flags.sum())} boundary-point cells")
    return EXIT_OK


COMMANDS = {
    "symcheck": (cmd_symcheck, "check the symmetry relations of H(k)"),
    "spectrum": (cmd_spectrum, "track the four energy strings over the zone"),
    "braid": (cmd_braid, "braid word, linking matrix and knot class"),
    "winding": (cmd_winding, "spectral winding number at one point"),
    "boundaries": (cmd_boundaries, "analytic phase-boundary lambdas and curves"),
    "phase-diagram": (cmd_phase_diagram, "winding-number map over (lambda, t2)"),
    "ee-cut": (cmd_ee_cut, "entanglement entropy versus subsystem size"),
    "ee-size": (cmd_ee_size, "half-chain entropy versus total size"),
    "cfit": (cmd_cfit, "central charge from both scaling fits"),
    "fidelity": (cmd_fidelity, "fidelity and susceptibility at one point"),
    "fidelity-scan": (cmd_fidelity_scan, "clipped log fidelity susceptibility map"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="flat key = value config file")
    common.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--out", "-o", help="output directory (config key 'out')")
    common.add_argument("--workers", "-j", help="worker processes, integer or 'auto'")

    parser = argparse.ArgumentParser(prog="nhknots", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    overrides = list(args.set)
    if args.out is not None:
        overrides.append(f"out={args.out}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    func = COMMANDS[args.command][0]
    try:
        cfg = io.RunConfig.resolve(args.command, args.config, overrides)
        return func(cfg)
    except ConfigError as exc:
        print(f"nhknots: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NHKnotsError as exc:
        print(f"nhknots: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
