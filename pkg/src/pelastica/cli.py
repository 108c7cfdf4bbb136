"""Command-line front end: config resolution, presets, run orchestration, exports.

Configs are key = value files (a flat TOML-compatible subset: numbers, strings,
booleans, lists of numbers, # comments) with equivalent command-line flags;
flags override file values.  Outputs are CSV monitors (one row per step, 17
significant digits, byte-reproducible), per-frame curve CSV/SVG files, and a
one-row summary.

Exit codes: 0 ok, 1 parse, 2 validation, 3 closure, 4 horizon, 5 step failed,
6 monitor violation, 7 io, 8 smallness check failed (strict mode), 9 internal.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .energy import energy_fp
from .errors import (
    ClosureViolatedAtStart,
    FileError,
    HorizonExceeded,
    MonitorViolation,
    NewtonDiverged,
    ParseError,
    PElasticaError,
    SingularJacobian,
    StepFailed,
    ValidationError,
)
from .field import TWO_PI, AngleField, PeriodicGrid, make_field
from .flow import FlowParams, Trajectory, check_smallness_sc, continue_p2, horizon, run_flow
from .geometry import project_closure, reconstruct
from .step import SolverOptions

MONITOR_HEADER = (
    "i,t,fp,penalty,lambda1,lambda2,det_at,delta,v_l2,v_h1,closure,l2u,"
    "eq39_margin,eq311_margin,cumv2"
)
FRAME_HEADER = "s,u,theta,kappa,x,y"

_PRESETS = ("circle", "fourier", "file")
_SC_MODES = ("off", "report", "strict")


@dataclass
class RunConfig:
    p: float = 2.0
    L: float = TWO_PI
    M: int = 128
    eta: int = 1
    n: int = 100
    T: float | None = None
    tau: float | None = None
    preset: str = "circle"
    a: list[float] = dc_field(default_factory=list)
    b: list[float] = dc_field(default_factory=list)
    seed_file: str | None = None
    out_dir: str = "out"
    frame_stride: int = 10
    continuation_rounds: int = 1
    override_horizon: bool = False
    sc_check: str = "off"
    sc_delta: float = 0.5
    closure_tol: float = 1e-8
    grad_tol: float | None = None
    max_iters: int = 10000
    emit_csv: bool = True
    emit_svg: bool = True
    emit_monitors: bool = True


_LIST_KEYS = {"a", "b"}
_FLOAT_KEYS = {"p", "L", "T", "tau", "closure_tol", "grad_tol", "sc_delta"}
_INT_KEYS = {"M", "eta", "n", "frame_stride", "continuation_rounds", "max_iters"}
_BOOL_KEYS = {"override_horizon", "emit_csv", "emit_svg", "emit_monitors"}
_STR_KEYS = {"preset", "seed_file", "out_dir", "sc_check"}
_ALL_KEYS = _LIST_KEYS | _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS


def _parse_scalar(text: str, key: str, where: str):
    text = text.strip()
    if key in _BOOL_KEYS:
        if text in ("true", "True"):
            return True
        if text in ("false", "False"):
            return False
        raise ParseError(f"{where}: boolean key '{key}' got {text!r}")
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError as exc:
            raise ParseError(f"{where}: integer key '{key}' got {text!r}") from exc
    if key in _FLOAT_KEYS:
        try:
            return float(text)
        except ValueError as exc:
            raise ParseError(f"{where}: numeric key '{key}' got {text!r}") from exc
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    return text


def load_config_file(path: str) -> dict:
    """Parse the key = value subset; unknown keys and malformed lines are errors."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from exc
    out: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        where = f"{path}:{lineno}"
        if key not in _ALL_KEYS:
            raise ParseError(f"{where}: unknown key '{key}'")
        value = value.strip()
        if key in _LIST_KEYS:
            if not (value.startswith("[") and value.endswith("]")):
                raise ParseError(f"{where}: key '{key}' expects a list like [0.0, 0.1]")
            body = value[1:-1].strip()
            try:
                out[key] = [float(v) for v in body.split(",")] if body else []
            except ValueError as exc:
                raise ParseError(f"{where}: bad number in list '{key}'") from exc
        else:
            out[key] = _parse_scalar(value, key, where)
    return out


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pelastica",
        description="p-elastic gradient flow of closed inextensible planar curves",
        add_help=True,
    )
    ap.add_argument("--config", help="key = value config file")
    ap.add_argument("--p", type=float)
    ap.add_argument("--L", type=float)
    ap.add_argument("--M", type=int)
    ap.add_argument("--eta", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--T", type=float)
    ap.add_argument("--tau", type=float)
    ap.add_argument("--preset", choices=_PRESETS)
    ap.add_argument("--a", help="comma-separated sine amplitudes, mode 1 first")
    ap.add_argument("--b", help="comma-separated cosine amplitudes, mode 1 first")
    ap.add_argument("--seed-file", dest="seed_file")
    ap.add_argument("--out-dir", dest="out_dir")
    ap.add_argument("--frame-stride", dest="frame_stride", type=int)
    ap.add_argument("--continuation-rounds", dest="continuation_rounds", type=int)
    ap.add_argument("--override-horizon", dest="override_horizon", action="store_true", default=None)
    ap.add_argument("--sc-check", dest="sc_check", choices=_SC_MODES)
    ap.add_argument("--sc-delta", dest="sc_delta", type=float)
    ap.add_argument("--closure-tol", dest="closure_tol", type=float)
    ap.add_argument("--grad-tol", dest="grad_tol", type=float)
    ap.add_argument("--max-iters", dest="max_iters", type=int)
    ap.add_argument("--no-csv", dest="emit_csv", action="store_false", default=None)
    ap.add_argument("--no-svg", dest="emit_svg", action="store_false", default=None)
    ap.add_argument("--no-monitors", dest="emit_monitors", action="store_false", default=None)
    return ap


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve a RunConfig from flags and (optionally) a config file."""
    ap = _build_argparser()
    ns, leftover = ap.parse_known_args(argv)
    if leftover:
        raise ParseError(f"unknown arguments: {' '.join(leftover)}")
    cfg = RunConfig()
    if ns.config:
        for key, value in load_config_file(ns.config).items():
            setattr(cfg, key, value)
    for key in _ALL_KEYS:
        value = getattr(ns, key, None)
        if value is None:
            continue
        if key in _LIST_KEYS:
            try:
                value = [float(v) for v in value.split(",")] if value else []
            except ValueError as exc:
                raise ParseError(f"flag --{key} expects comma-separated numbers") from exc
        setattr(cfg, key, value)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if not cfg.p > 1.0:
        raise ValidationError(f"p must exceed 1, got {cfg.p}")
    if cfg.p < 1.05:
        raise ValidationError(
            f"p = {cfg.p} is below the supported CLI regime (p >= 1.05); "
            "the estimates degenerate near p = 1"
        )
    if not (cfg.L > 0 and math.isfinite(cfg.L)):
        raise ValidationError(f"L must be a positive real, got {cfg.L}")
    if cfg.M < 4:
        raise ValidationError(f"M must be >= 4, got {cfg.M}")
    if cfg.eta < 1:
        raise ValidationError(f"eta must be >= 1, got {cfg.eta}")
    if cfg.n < 1:
        raise ValidationError(f"n must be >= 1, got {cfg.n}")
    if cfg.T is not None and not cfg.T > 0:
        raise ValidationError(f"T must be positive, got {cfg.T}")
    if cfg.tau is not None and not cfg.tau > 0:
        raise ValidationError(f"tau must be positive, got {cfg.tau}")
    if cfg.T is not None and cfg.tau is not None:
        if abs(cfg.tau * cfg.n - cfg.T) > 1e-12 * max(cfg.T, 1.0):
            raise ValidationError(
                f"tau and T are redundant and inconsistent: tau*n = {cfg.tau * cfg.n} vs T = {cfg.T}"
            )
    if cfg.preset not in _PRESETS:
        raise ValidationError(f"preset must be one of {_PRESETS}, got {cfg.preset!r}")
    if cfg.preset == "file" and not cfg.seed_file:
        raise ValidationError("preset 'file' requires seed_file")
    if cfg.frame_stride < 1:
        raise ValidationError(f"frame_stride must be >= 1, got {cfg.frame_stride}")
    if cfg.continuation_rounds < 1:
        raise ValidationError(f"continuation_rounds must be >= 1, got {cfg.continuation_rounds}")
    if cfg.continuation_rounds > 1 and cfg.p != 2.0:
        raise ValidationError("continuation_rounds > 1 requires p = 2")
    if cfg.sc_check not in _SC_MODES:
        raise ValidationError(f"sc_check must be one of {_SC_MODES}, got {cfg.sc_check!r}")
    if cfg.sc_check != "off" and cfg.p < 2.0:
        raise ValidationError("sc_check requires p >= 2")
    if not cfg.closure_tol > 0:
        raise ValidationError("closure_tol must be positive")
    if cfg.grad_tol is not None and not cfg.grad_tol > 0:
        raise ValidationError("grad_tol must be positive")
    if cfg.max_iters < 1:
        raise ValidationError("max_iters must be >= 1")


def build_initial(cfg: RunConfig) -> AngleField:
    """Resolve the initial-data preset to an admissible (closed) field."""
    grid = PeriodicGrid(length_L=cfg.L, cells_M=cfg.M, winding_eta=cfg.eta)
    if cfg.preset == "circle":
        return make_field(grid, np.zeros(cfg.M))
    if cfg.preset == "fourier":
        s = grid.nodes
        u = np.zeros(cfg.M)
        for k, amp in enumerate(cfg.a, start=1):
            u += amp * np.sin(k * TWO_PI * s / cfg.L)
        for k, amp in enumerate(cfg.b, start=1):
            u += amp * np.cos(k * TWO_PI * s / cfg.L)
        raw = make_field(grid, u)
    else:
        try:
            samples = np.loadtxt(cfg.seed_file, dtype=float)
        except OSError as exc:
            raise FileError(f"cannot read seed file {cfg.seed_file}: {exc}") from exc
        except ValueError as exc:
            raise FileError(f"malformed seed file {cfg.seed_file}: {exc}") from exc
        samples = np.atleast_1d(samples)
        if samples.shape != (cfg.M,):
            raise FileError(
                f"seed file {cfg.seed_file} holds {samples.shape} values, expected {cfg.M}"
            )
        raw = make_field(grid, samples)
    return project_closure(raw, tol=min(1e-12, cfg.closure_tol))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_monitors(path: Path, traj: Trajectory) -> None:
    rows = [MONITOR_HEADER]
    for r in traj.records:
        rows.append(
            ",".join(
                [
                    str(r.index),
                    _fmt(r.t),
                    _fmt(r.fp),
                    _fmt(r.penalty),
                    _fmt(r.lambda1),
                    _fmt(r.lambda2),
                    _fmt(r.det_at),
                    _fmt(r.delta),
                    _fmt(r.velocity_l2),
                    _fmt(r.velocity_h1),
                    _fmt(r.closure_residual),
                    _fmt(r.l2_norm_u),
                    _fmt(r.eq39_margin),
                    _fmt(r.eq311_margin),
                    _fmt(r.cumulative_velocity_sq),
                ]
            )
        )
    path.write_text("\n".join(rows) + "\n")


def _frame_rows(f: AngleField) -> str:
    grid = f.grid
    curve = reconstruct(f)
    M = grid.cells_M
    rows = [FRAME_HEADER]
    theta = f.node_angles()
    for j in range(M + 1):
        s = grid.length_L if j == M else j * grid.cell_width_h
        u = f.values[j % M]
        th = theta[0] + TWO_PI * grid.winding_eta if j == M else theta[j]
        kappa = curve.curvatures[j % M]
        x, y = curve.points[j]
        rows.append(
            ",".join([_fmt(s), _fmt(u), _fmt(th), _fmt(kappa), _fmt(x), _fmt(y)])
        )
    return "\n".join(rows) + "\n"


def _svg(f: AngleField, viewbox: tuple[float, float, float, float]) -> str:
    curve = reconstruct(f)
    pts = " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in curve.points)
    vx, vy, vw, vh = viewbox
    stroke = 0.005 * max(vw, vh)
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(vx)} {_fmt(vy)} {_fmt(vw)} {_fmt(vh)}">\n'
        f'  <polyline points="{pts}" fill="none" stroke="black" stroke-width="{_fmt(stroke)}"/>\n'
        "</svg>\n"
    )


def _initial_viewbox(f: AngleField) -> tuple[float, float, float, float]:
    """viewBox fitted to the initial curve's bounding box, scaled by 1.5."""
    pts = reconstruct(f).points
    x0, y0 = pts[:, 0].min(), (-pts[:, 1]).min()
    x1, y1 = pts[:, 0].max(), (-pts[:, 1]).max()
    w, h = x1 - x0, y1 - y0
    w = w if w > 0 else 1.0
    h = h if h > 0 else 1.0
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return (cx - 0.75 * w, cy - 0.75 * h, 1.5 * w, 1.5 * h)


def run(cfg: RunConfig) -> int:
    """Execute the configured run, write artifacts, return an exit code."""
    u0 = build_initial(cfg)
    if cfg.sc_check != "off":
        rep = check_smallness_sc(u0, cfg.p, sc_delta=cfg.sc_delta)
        print(
            f"smallness: c_star_ok={rep.c_star_ok} slope_floor_ok={rep.slope_floor_ok} "
            f"v0_ok={rep.v0_ok} (|V0|^2 = {rep.v0_norm_sq:.6e} vs {rep.sc_delta})"
        )
        if cfg.sc_check == "strict" and not rep.passes:
            print("smallness check failed in strict mode", file=sys.stderr)
            return 8

    T = cfg.T if cfg.T is not None else (cfg.tau * cfg.n if cfg.tau is not None else None)
    params = FlowParams(
        p=cfg.p,
        n_steps=cfg.n,
        horizon_T=T,
        solver=SolverOptions(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters),
        continuation_rounds=cfg.continuation_rounds,
        override_horizon=cfg.override_horizon,
        closure_tol=cfg.closure_tol,
        store_stride=cfg.frame_stride,
    )
    if cfg.p == 2.0 and cfg.continuation_rounds > 1:
        traj = continue_p2(u0, params)
    else:
        traj = run_flow(u0, params)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.emit_monitors:
        _write_monitors(out / "monitors.csv", traj)
    if cfg.emit_csv or cfg.emit_svg:
        frames = out / "frames"
        frames.mkdir(exist_ok=True)
        viewbox = _initial_viewbox(traj.initial)
        for idx in sorted(traj.stored):
            f = traj.stored[idx]
            if cfg.emit_csv:
                (frames / f"frame_{idx:06d}.csv").write_text(_frame_rows(f))
            if cfg.emit_svg:
                (frames / f"frame_{idx:06d}.svg").write_text(_svg(f, viewbox))

    hc = traj.horizon
    fp0 = energy_fp(traj.initial, cfg.p).fp
    fp_final = traj.records[-1].fp if traj.records else fp0
    dissipation = traj.records[-1].cumulative_velocity_sq if traj.records else 0.0
    closure_final = traj.records[-1].closure_residual if traj.records else 0.0
    summary_header = "c_star,c_one,t_max,T,n,tau,fp_initial,fp_final,dissipation,closure_final"
    summary_row = ",".join(
        [
            _fmt(hc.c_star),
            _fmt(hc.c_one),
            _fmt(hc.t_max),
            _fmt(traj.t_final),
            str(traj.n_total),
            _fmt(traj.tau),
            _fmt(fp0),
            _fmt(fp_final),
            _fmt(dissipation),
            _fmt(closure_final),
        ]
    )
    (out / "summary.csv").write_text(summary_header + "\n" + summary_row + "\n")
    print(f"done: {traj.n_total} steps, fp {fp0:.12g} -> {fp_final:.12g}, out -> {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except (ClosureViolatedAtStart, NewtonDiverged, SingularJacobian) as exc:
        print(f"closure error: {exc}", file=sys.stderr)
        return 3
    except HorizonExceeded as exc:
        print(f"horizon error: {exc}", file=sys.stderr)
        return 4
    except StepFailed as exc:
        print(f"step failed: {exc}", file=sys.stderr)
        return 5
    except MonitorViolation as exc:
        print(f"monitor violation [{exc.name}]: {exc}", file=sys.stderr)
        return 6
    except (FileError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 7
    except PElasticaError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 9
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 9


if __name__ == "__main__":
    sys.exit(main())
