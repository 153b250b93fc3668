"""Command-line front end: experiment orchestration, CSV export, GPTW files.

Commands: minimize (global-minimizer experiment), mp (mountain-pass
pipeline), spectrum (Hessian spectrum report), scan (small-period constancy
scan), testfn (vortex test-function scaling table), certify (certificates of
a stored field), info (GPTW file metadata).

Configuration comes from flags plus an optional `key = value` file
(# comments allowed); flags override file values. Every output directory
receives the fully resolved configuration for reproducibility. Exit codes:
0 success, 2 validation error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path as FsPath

import numpy as np

from .ansatz import (NoSuchSolution, SupportTooLarge, VortexAnsatz,
                     fitted_vortex_ansatz, vortex_test_function)
from .field import (ComplexField, FieldFormatError, TorusGrid, read_field,
                    read_header, write_field)
from .functionals import (Params, action, certificate_csv_header,
                          certificate_csv_row, certify)
from .minimize import MinimizeOptions, minimizer_experiment
from .mountainpass import NotASaddle, SaddleOptions, mountain_pass_pipeline
from .spectrum import (constancy_scan, hessian_spectrum_at_constant,
                       positivity_criterion, NoConvergence)

_FLOAT_KEYS = {"c", "T", "R", "tol", "core_width", "cutoff_inner", "cutoff_outer"}
_INT_KEYS = {"N", "size", "seed", "starts", "max_iters", "nodes", "count", "band"}
_CONFIG_ALIASES = {"max-iters": "max_iters", "core-width": "core_width",
                   "cutoff-inner": "cutoff_inner", "cutoff-outer": "cutoff_outer"}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def load_config(path) -> dict:
    """Parse a `key = value` configuration file; # starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key = _CONFIG_ALIASES.get(key.strip(), key.strip())
            values[key] = val.strip()
    return values


def _coerce(key: str, raw: str):
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    return raw


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Flags override config-file values override built-in defaults."""
    cfg = {}
    if getattr(args, "config", None):
        for key, raw in load_config(args.config).items():
            if key not in defaults:
                raise ValueError(f"unknown configuration key {key!r}")
            cfg[key] = _coerce(key, raw)
    resolved = dict(defaults)
    resolved.update(cfg)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def _prepare_out(resolved: dict, command: str) -> FsPath:
    out = FsPath(resolved.get("out") or f"gptw_{command}")
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"command = {command}"]
    for key in sorted(k for k in resolved if k != "out"):
        lines.append(f"{key} = {_fmt(resolved[key])}")
    lines.append(f"out = {out}")
    (out / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def _ansatz_from(resolved: dict, R: float, T: float) -> VortexAnsatz:
    """Explicit cutoffs/core width win over the fitted defaults."""
    width = resolved.get("core_width")
    inner = resolved.get("cutoff_inner")
    outer = resolved.get("cutoff_outer")
    if inner is None and outer is None and width is None:
        return fitted_vortex_ansatz(R, T)
    base = fitted_vortex_ansatz(R, T)
    return VortexAnsatz(R,
                        core_width=width if width is not None else 1.0,
                        cutoff_inner=inner if inner is not None else base.cutoff_inner,
                        cutoff_outer=outer if outer is not None else base.cutoff_outer)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GPTW_THREADS", "1")))
    except ValueError:
        return 1


def write_pgm(path, data: np.ndarray):
    """8-bit binary PGM of a real 2-d array, min-max scaled."""
    lo, hi = float(data.min()), float(data.max())
    span = hi - lo if hi > lo else 1.0
    img = np.clip((data - lo) / span * 255.0, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def _field_images(out: FsPath, stem: str, f: ComplexField):
    if f.grid.dim != 2:
        return
    write_pgm(out / f"{stem}_modulus.pgm", np.abs(f.values))
    write_pgm(out / f"{stem}_phase.pgm", np.angle(f.values))


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def _cmd_minimize(args) -> int:
    defaults = dict(c=1.0, T=40.0, N=2, size=256, R=8.0, seed=0,
                    tol=None, max_iters=50000, out=None,
                    core_width=None, cutoff_inner=None, cutoff_outer=None)
    resolved = _resolve(args, defaults)
    resolved["T"] = float(resolved["T"])
    resolved["R"] = float(resolved["R"])
    out = _prepare_out(resolved, "minimize")
    grid = TorusGrid((resolved["size"],) * resolved["N"], resolved["T"])
    init = vortex_test_function(
        _ansatz_from(resolved, resolved["R"], resolved["T"]), grid)
    opts = MinimizeOptions(max_iters=resolved["max_iters"], grad_tol=resolved["tol"])
    with open(out / "progress.log", "w", encoding="utf-8") as log:
        opts.log_stream = log
        point, row = minimizer_experiment(resolved["c"], resolved["T"], resolved["size"],
                                          resolved["R"], init=init, opts=opts,
                                          dim=resolved["N"])
    write_field(out / "minimizer.gptw", point.field, c=resolved["c"])
    (out / "summary.csv").write_text(
        "c,T,action,residual,classification\n"
        + ",".join([_fmt(row["c"]), _fmt(row["T"]), _fmt(row["action"]),
                    _fmt(row["residual"]), row["classification"]]) + "\n",
        encoding="utf-8")
    p = Params(c=resolved["c"])
    (out / "certificate.csv").write_text(
        certificate_csv_header() + "\n"
        + certificate_csv_row(point.field.grid, p, point.report, point.certificate) + "\n",
        encoding="utf-8")
    if args.images:
        _field_images(out, "minimizer", point.field)
    print(f"minimize: action={_fmt(point.report.action)} residual={_fmt(point.residual)} "
          f"classification={point.classification} -> {out}")
    return 0 if point.converged else 3


def _cmd_mp(args) -> int:
    defaults = dict(c=1.0, T=40.0, N=2, size=256, R=8.0, nodes=33, seed=0,
                    tol=None, max_iters=20000, out=None,
                    core_width=None, cutoff_inner=None, cutoff_outer=None)
    resolved = _resolve(args, defaults)
    resolved["T"] = float(resolved["T"])
    resolved["R"] = float(resolved["R"])
    out = _prepare_out(resolved, "mp")
    grid = TorusGrid((resolved["size"],) * resolved["N"], resolved["T"])
    sopts = SaddleOptions(max_iters=resolved["max_iters"], grad_tol=resolved["tol"],
                          seed=resolved["seed"])
    try:
        result, relaxed, upper = mountain_pass_pipeline(
            resolved["c"], grid, resolved["R"], node_count=resolved["nodes"],
            ansatz=_ansatz_from(resolved, resolved["R"], resolved["T"]),
            saddle_opts=sopts)
    except NotASaddle as exc:
        print(f"mp: {exc}", file=sys.stderr)
        return 3
    p = Params(c=resolved["c"])
    acts = relaxed.actions(p)
    lines = ["node,t,action"]
    for i, (node, a) in enumerate(zip(relaxed.nodes, acts)):
        write_field(out / f"path_{i:03d}.gptw", node, c=resolved["c"])
        lines.append(f"{i},{_fmt(i / (len(acts) - 1))},{_fmt(float(a))}")
    (out / "path_actions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    saddle = result.saddle
    write_field(out / "saddle.gptw", saddle.field, c=resolved["c"])
    (out / "saddle.csv").write_text(
        "gamma,M,action,residual,witness_value,classification\n"
        + ",".join([_fmt(result.gamma), _fmt(result.upper_bound),
                    _fmt(saddle.report.action), _fmt(saddle.residual),
                    _fmt(result.witness_value), saddle.classification]) + "\n",
        encoding="utf-8")
    (out / "saddle_certificate.csv").write_text(
        certificate_csv_header() + "\n"
        + certificate_csv_row(grid, p, saddle.report, saddle.certificate) + "\n",
        encoding="utf-8")
    if args.images:
        _field_images(out, "saddle", saddle.field)
    print(f"mp: gamma={_fmt(result.gamma)} M={_fmt(result.upper_bound)} "
          f"saddle action={_fmt(saddle.report.action)} residual={_fmt(saddle.residual)} -> {out}")
    return 0 if saddle.converged else 3


def _cmd_spectrum(args) -> int:
    defaults = dict(c=1.0, T=2 * np.pi, N=2, size=16, count=6, seed=0, out=None)
    resolved = _resolve(args, defaults)
    resolved["T"] = float(resolved["T"])
    out = _prepare_out(resolved, "spectrum")
    grid = TorusGrid((resolved["size"],) * resolved["N"], resolved["T"])
    p = Params(c=resolved["c"])
    try:
        rep = hessian_spectrum_at_constant(0.0, p, grid, count=resolved["count"],
                                           seed=resolved["seed"])
    except NoConvergence as exc:
        print(f"spectrum: {exc}", file=sys.stderr)
        return 3
    lines = ["c,T,value,mode,branch"]
    for value, mode, branch in rep.eigenvalues:
        mode_txt = " ".join(str(m) for m in mode)
        lines.append(f"{_fmt(rep.speed)},{_fmt(rep.period)},{_fmt(value)},{mode_txt},{branch}")
    lines.append(f"# analytic_min = {_fmt(rep.analytic_min)}")
    lines.append(f"# degenerate_residual = {_fmt(rep.degenerate_residual)}")
    lines.append(f"# positivity = {rep.positivity}")
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.images:
        cs = np.linspace(0.1, 2.0, 64)
        Ts = np.linspace(max(resolved["T"] / 4.0, 0.5), 2.0 * resolved["T"], 64)
        img = np.array([[1.0 if positivity_criterion(cv, Tv) else 0.0 for Tv in Ts]
                        for cv in cs])
        write_pgm(out / "positivity.pgm", img)
    print(f"spectrum: smallest={_fmt(rep.eigenvalues[0][0])} positivity={rep.positivity} -> {out}")
    return 0


def _parse_list(text: str) -> list[float]:
    return [float(tok) for tok in str(text).replace(",", " ").split()]


def _cmd_scan(args) -> int:
    defaults = dict(c=1.0, T="1.0,1.5,1.8", size=32, starts=20, seed=0,
                    band=4, out=None)
    resolved = _resolve(args, defaults)
    out = _prepare_out(resolved, "scan")
    T_values = _parse_list(resolved["T"])
    if not T_values:
        raise ValueError("scan needs at least one period in --T")
    threads = _threads()
    if threads > 1 and len(T_values) > 1:
        from concurrent.futures import ThreadPoolExecutor

        def one(T):
            return constancy_scan(resolved["c"], [T], resolved["starts"],
                                  resolved["size"], seed=resolved["seed"],
                                  band=resolved["band"]).rows[0]

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, sorted(T_values)))
        from .spectrum import ThresholdReport, case1_bound, plane_wave_onset
        onset = next((r.T for r in rows if not r.all_constant), float("inf"))
        rep = ThresholdReport(resolved["c"], case1_bound(resolved["c"]),
                              plane_wave_onset(resolved["c"]), onset, tuple(rows))
    else:
        rep = constancy_scan(resolved["c"], T_values, resolved["starts"],
                             resolved["size"], seed=resolved["seed"],
                             band=resolved["band"])
    lines = ["T,all_constant,nonconstant,unconverged"]
    for r in rep.rows:
        lines.append(f"{_fmt(r.T)},{str(r.all_constant).lower()},{r.nonconstant},{r.unconverged}")
    lines.append(f"# case1_bound = {_fmt(rep.case1_bound)}")
    lines.append(f"# plane_wave_onset = {_fmt(rep.plane_wave_onset)}")
    lines.append(f"# empirical_onset = {_fmt(rep.empirical_onset)}")
    (out / "threshold.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"scan: onset={_fmt(rep.empirical_onset)} "
          f"(case1={_fmt(rep.case1_bound)}, plane wave={_fmt(rep.plane_wave_onset)}) -> {out}")
    return 0


def _cmd_testfn(args) -> int:
    defaults = dict(c=1.0, R="4,8,16,32", seed=0, out=None,
                    core_width=None, cutoff_inner=None, cutoff_outer=None)
    resolved = _resolve(args, defaults)
    out = _prepare_out(resolved, "testfn")
    R_values = _parse_list(resolved["R"])
    p = Params(c=resolved["c"])
    lines = ["R,T,size,kinetic,potential,momentum,action"]
    table = []
    for R in R_values:
        T = 8.25 * R
        size = 1 << max(6, int(np.ceil(np.log2(T / 0.52))))
        grid = TorusGrid((size, size), T)
        f = vortex_test_function(_ansatz_from(resolved, R, T), grid)
        rep = action(f, p)
        table.append((R, rep))
        lines.append(",".join([_fmt(R), _fmt(T), str(size), _fmt(rep.kinetic),
                               _fmt(rep.potential), _fmt(rep.momentum), _fmt(rep.action)]))
    if len(table) >= 2:
        logR = np.log([r for r, _ in table])
        logP = np.log([rep.momentum for _, rep in table])
        slope = float(np.polyfit(logR, logP, 1)[0])
        lines.append(f"# momentum_loglog_slope = {_fmt(slope)}")
        ratio = table[-1][1].kinetic / table[-2][1].kinetic
        lines.append(f"# kinetic_ratio_last = {_fmt(float(ratio))}")
    (out / "testfn.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"testfn: {len(table)} rows -> {out}")
    return 0


def _cmd_certify(args) -> int:
    f, c_stored = read_field(args.file)
    c = args.c if args.c is not None else c_stored
    p = Params(c=c)
    rep = action(f, p)
    cert = certify(f, p)
    text = certificate_csv_header() + "\n" + certificate_csv_row(f.grid, p, rep, cert) + "\n"
    if args.out:
        out = FsPath(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "certificate.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _cmd_info(args) -> int:
    with open(args.file, "rb") as fh:
        raw = fh.read()
    head = read_header(raw)
    f, c = read_field(args.file)
    mod = np.abs(f.values)
    print(f"file: {args.file}")
    print(f"format version: {head['version']}")
    print(f"dimension: {head['dim']}")
    print(f"sizes: {'x'.join(str(m) for m in head['sizes'])}")
    print(f"period: {_fmt(head['period'])}")
    print(f"speed c: {_fmt(head['c'])}")
    print(f"nodes: {f.grid.node_count}")
    print(f"modulus range: [{_fmt(float(mod.min()))}, {_fmt(float(mod.max()))}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gptw",
        description="Periodic traveling-wave workbench: minimize the action, "
                    "search mountain-pass saddles, analyze Hessian spectra, "
                    "scan small periods for constancy.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, *, R=True, nodes=False, starts=False, count=False):
        sp.add_argument("--c", type=float, default=None, help="wave speed")
        sp.add_argument("--T", default=None, help="period (scan: comma list)")
        sp.add_argument("--N", type=int, default=None, choices=(2, 3), help="dimension")
        sp.add_argument("--size", type=int, default=None, help="points per axis")
        if R:
            sp.add_argument("--R", default=None, help="vortex radius (testfn: comma list)")
            sp.add_argument("--core-width", dest="core_width", type=float, default=None)
            sp.add_argument("--cutoff-inner", dest="cutoff_inner", type=float, default=None)
            sp.add_argument("--cutoff-outer", dest="cutoff_outer", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None, help="random seed")
        if starts:
            sp.add_argument("--starts", type=int, default=None, help="multistart count")
            sp.add_argument("--band", type=int, default=None, help="perturbation band limit")
        sp.add_argument("--tol", type=float, default=None, help="residual tolerance")
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        if nodes:
            sp.add_argument("--nodes", type=int, default=None, help="path node count")
        if count:
            sp.add_argument("--count", type=int, default=None, help="eigenvalue count")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--config", default=None, help="key = value configuration file")
        sp.add_argument("--images", action="store_true", help="write PGM images")

    sp = sub.add_parser("minimize", help="global-minimizer experiment from 1 + w_R")
    common(sp)
    sp.set_defaults(handler=_cmd_minimize)

    sp = sub.add_parser("mp", help="mountain-pass pipeline: path, relax, saddle")
    common(sp, nodes=True)
    sp.set_defaults(handler=_cmd_mp)

    sp = sub.add_parser("spectrum", help="Hessian spectrum at the constant solution")
    common(sp, R=False, count=True)
    sp.set_defaults(handler=_cmd_spectrum)

    sp = sub.add_parser("scan", help="small-period constancy scan")
    common(sp, R=False, starts=True)
    sp.set_defaults(handler=_cmd_scan)

    sp = sub.add_parser("testfn", help="vortex test-function scaling table")
    common(sp)
    sp.set_defaults(handler=_cmd_testfn)

    sp = sub.add_parser("certify", help="certificates of a stored field")
    sp.add_argument("file", help="GPTW field file")
    sp.add_argument("--c", type=float, default=None, help="override stored speed")
    sp.add_argument("--out", default=None, help="also write certificate.csv here")
    sp.set_defaults(handler=_cmd_certify)

    sp = sub.add_parser("info", help="print GPTW file metadata")
    sp.add_argument("file", help="GPTW field file")
    sp.set_defaults(handler=_cmd_info)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (FieldFormatError, NoSuchSolution, SupportTooLarge, ValueError, OSError) as exc:
        print(f"gptw {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
