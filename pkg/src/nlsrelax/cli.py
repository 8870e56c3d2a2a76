"""Batch command line front end.

Subcommands: ``mesh-gen``, ``run``, ``eoc-time``, ``eoc-space``, ``probe``.
Runs default to the reduced "desk" scale of each preset; ``--full-scale``
selects the mesh size and time step of the reference experiments.

Exit codes: 0 success, 2 configuration or input error, 3 mesh error,
4 linear solver error, 5 numerical blow-up.
"""
from __future__ import annotations

import argparse
import configparser
import contextlib
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import fem, output, scenarios
from .linalg import SolverConfig, SolverError
from .mesh import (MeshError, delaunay_triangulate, generate_structured, quality_report, read_mesh, tag_boundary,
                   write_mesh)
from .stepper import BlowupError, RelaxationCN, StepperConfig

log = logging.getLogger("nlsrelax")

EXIT_OK, EXIT_CONFIG, EXIT_MESH, EXIT_SOLVER, EXIT_BLOWUP = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: str = "bright-neumann"
    mesh_path: str | None = None
    triangles: int | None = None
    degree: int | None = None
    k: float | None = None
    T_final: float | None = None
    tol: float = 1e-12
    solver: str = "direct"
    out: str = "nlsrelax-out"
    snapshot_times: tuple = ()
    vtk: bool = False
    cross_section_y: float | None = None
    cross_section_samples: int = 401
    record_every: int | None = None
    full_scale: bool = False
    threads: int | None = None

    def resolve(self):
        """Validate and fill unset values from the preset; returns the preset."""
        try:
            p = scenarios.preset(self.preset)
        except scenarios.UnknownPresetError as exc:
            raise ConfigError(str(exc)) from None
        if self.mesh_path is not None and self.triangles is not None:
            raise ConfigError("give either a mesh file or a triangle count, not both")
        scale = {} if self.full_scale else p.desk
        if self.degree is None:
            self.degree = p.degree
        if self.k is None:
            self.k = scale.get("k", p.k)
        if self.T_final is None:
            self.T_final = scale.get("T_final", p.T_final)
        if self.mesh_path is None and self.triangles is None:
            self.triangles = scale.get("triangles", p.triangles)
        if self.degree not in (1, 2):
            raise ConfigError(f"degree must be 1 or 2, got {self.degree}")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ConfigError(f"time step must be positive, got {self.k}")
        if self.k > self.T_final:
            raise ConfigError(f"time step {self.k} exceeds final time {self.T_final}")
        if not 0 < self.tol < 1:
            raise ConfigError(f"solver tolerance must lie in (0, 1), got {self.tol}")
        if self.solver not in ("direct", "iterative"):
            raise ConfigError(f"solver must be 'direct' or 'iterative', got {self.solver!r}")
        if self.triangles is not None and self.triangles < 2:
            raise ConfigError("triangle count must be at least 2")
        if self.cross_section_samples < 2:
            raise ConfigError("cross sections need at least 2 samples")
        return p


_CONFIG_KEYS = {
    # section.key -> (RunConfig field, parser)
    "run.preset": ("preset", str),
    "run.degree": ("degree", int),
    "run.dt": ("k", float),
    "run.tfinal": ("T_final", float),
    "run.out": ("out", str),
    "run.full_scale": ("full_scale", "bool"),
    "run.record_every": ("record_every", int),
    "run.threads": ("threads", int),
    "solver.tol": ("tol", float),
    "solver.method": ("solver", str),
    "mesh.path": ("mesh_path", str),
    "mesh.triangles": ("triangles", int),
    "output.snapshot_times": ("snapshot_times", "floats"),
    "output.vtk": ("vtk", "bool"),
    "output.cross_section_y": ("cross_section_y", float),
    "output.cross_section_samples": ("cross_section_samples", int),
}


def read_config(path) -> dict:
    """Parse an INI run configuration into RunConfig keyword arguments."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            name = f"{section}.{key}"
            if name not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, kind = _CONFIG_KEYS[name]
            try:
                if kind == "bool":
                    value = cp.getboolean(section, key)
                elif kind == "floats":
                    value = tuple(float(v) for v in raw.replace(",", " ").split())
                else:
                    value = kind(raw)
            except ValueError:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from None
            values[attr] = value
    return values


def _build_config(args) -> RunConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "preset": args.preset, "mesh_path": args.mesh, "triangles": args.triangles,
        "degree": args.degree, "k": args.dt, "T_final": args.tfinal, "tol": args.tol,
        "out": args.out, "threads": args.threads,
    }
    for name in ("snapshot_times", "cross_section_y", "cross_section_samples", "record_every", "solver"):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    if getattr(args, "vtk", False):
        overrides["vtk"] = True
    if getattr(args, "full_scale", False):
        overrides["full_scale"] = True
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known})


def _load_mesh(cfg: RunConfig, p):
    if cfg.mesh_path is not None:
        return read_mesh(cfg.mesh_path)
    return p.make_mesh(cfg.triangles)


def _stepper_config(cfg: RunConfig, lam, forcing=None, k=None) -> StepperConfig:
    return StepperConfig(k=k or cfg.k, lam=lam, T_final=cfg.T_final,
                         solver=SolverConfig(method=cfg.solver, rel_tolerance=cfg.tol),
                         forcing=forcing, record_every=cfg.record_every)


@contextlib.contextmanager
def _thread_limit(n):
    if not n:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=n):
        yield


# -- commands -----------------------------------------------------------------

class _Snapshots:
    """Observer writing snapshots at the steps closest to the requested times."""

    def __init__(self, out: Path, times, k: float, vtk: bool, lam: float):
        self.out = out
        self.lam = lam
        self.pending = sorted({int(math.floor(t / k + 0.5)) for t in times if t >= 0})
        self.vtk = vtk
        self.written = []

    def __call__(self, state):
        while self.pending and self.pending[0] <= state.n:
            n = self.pending.pop(0)
            if n != state.n:
                continue
            stem = self.out / f"snapshot_{state.n:06d}"
            output.write_snapshot_csv(stem.with_suffix(".csv"), state.U)
            output.save_state(self.out / f"state_{state.n:06d}.json", state, self.lam)
            if self.vtk:
                output.write_vtk(stem.with_suffix(".vtk"), state.U, title=f"t={state.t:.17g}")
            self.written.append(stem.name)


def cmd_run(cfg: RunConfig) -> int:
    p = cfg.resolve()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh = _load_mesh(cfg, p)
    space = fem.build_space(mesh, cfg.degree)
    scfg = _stepper_config(cfg, p.lam, p.forcing)
    log.info("%s on %r, %r, k=%g, T=%g, %d steps", p.name, mesh, space, scfg.k, scfg.T_final, scfg.n_steps)
    stepper = RelaxationCN(space, scfg)
    state = stepper.init_state(p.initial)
    snaps = _Snapshots(out, cfg.snapshot_times, scfg.k, cfg.vtk, p.lam)
    try:
        state, records = stepper.run(state, [snaps])
    except (BlowupError, SolverError) as exc:
        output.write_diagnostics(out / "diagnostics.csv", getattr(exc, "records", []))
        raise
    output.write_diagnostics(out / "diagnostics.csv", records)
    output.save_state(out / "final_state.json", state, p.lam)
    if cfg.cross_section_y is not None:
        section = scenarios.cross_section(state.U, cfg.cross_section_y, cfg.cross_section_samples)
        output.write_cross_section(out / "cross_section.csv", section)
    mass = np.array([r.mass for r in records])
    energy = np.array([r.energy for r in records])
    print(f"preset {p.name}: {len(mesh.triangles)} triangles, P{cfg.degree}, {scfg.n_steps} steps to T={state.t:g}")
    print(f"mass   initial {mass[0]:.12g}  max relative drift {np.max(np.abs(mass / mass[0] - 1)):.3e}")
    print(f"energy initial {energy[0]:.12g}  max relative drift {np.max(np.abs(energy / energy[0] - 1)):.3e}")
    return EXIT_OK


def _eoc_column(errors, steps, floor):
    col = [None]
    for i in range(1, len(errors)):
        if errors[i] <= floor or errors[i - 1] <= floor:
            col.append(float("nan"))  # errors at round-off level carry no rate
        else:
            col.append(scenarios.eoc(errors[i - 1:i + 1], steps[i - 1:i + 1])[0])
    return col


def _print_table(header, rows):
    print("  ".join(f"{h:>14}" for h in header))
    for row in rows:
        cells = []
        for v in row:
            if v is None:
                cells.append(f"{'--':>14}")
            elif isinstance(v, float) and math.isnan(v):
                cells.append(f"{'n/a':>14}")
            elif isinstance(v, int):
                cells.append(f"{v:>14d}")
            else:
                cells.append(f"{v:>14.6e}")
        print("  ".join(cells))


def _write_table(path, header, rows):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else output.fmt(v) for v in row) + "\n")


def _control_problem(kind: str):
    if kind == "constant-exp":
        return scenarios.control_exp, scenarios.control_exp_forcing
    return scenarios.control_affine, scenarios.control_affine_forcing


def cmd_eoc_time(cfg: RunConfig, ladder=None, control: bool = False) -> int:
    p = cfg.resolve()
    ladder = tuple(ladder or p.ladder or (cfg.k,))
    if any(k <= 0 or k > cfg.T_final for k in ladder):
        raise ConfigError("every ladder step must lie in (0, T_final]")
    mesh = _load_mesh(cfg, p)
    lam, exact, forcing, initial = p.lam, p.exact, p.forcing, p.initial
    if control:
        # lam = 0 with a spatially constant solution: the error is purely temporal
        fn, force = _control_problem("constant-exp")
        lam, exact, initial = 0.0, fn, fn
        forcing = lambda x, y, t: force(x, y, t, 0.0)  # noqa: E731
        mesh = tag_boundary(mesh, lambda x, y: "N")
    if exact is None:
        raise ConfigError(f"preset {p.name} has no exact solution")
    space = fem.build_space(mesh, cfg.degree)
    errors = []
    for k in ladder:
        scfg = _stepper_config(cfg, lam, forcing, k=k)
        stepper = RelaxationCN(space, scfg)
        state, _ = stepper.run(stepper.init_state(initial))
        errors.append(fem.l2_error(state.U, exact, state.t))
        log.info("k=%g error=%.6e", k, errors[-1])
    rows = [(k, e, r) for k, e, r in zip(ladder, errors, _eoc_column(errors, ladder, 0.0))]
    print(f"temporal EOC, {p.name}{' (control)' if control else ''}: {len(mesh.triangles)} triangles, P{cfg.degree}, T={cfg.T_final:g}")
    _print_table(["k", "L2 error", "EOC"], rows)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "eoc_time.csv", ["k", "error", "eoc"], rows)
    return EXIT_OK


def cmd_eoc_space(cfg: RunConfig, ladder=None, control: bool = False) -> int:
    p = cfg.resolve()
    if ladder is None:
        ladder = p.ladder if cfg.full_scale else p.desk.get("ladder", p.ladder)
    ladder = tuple(int(n) for n in ladder)
    lam, exact, forcing, initial = p.lam, p.exact, p.forcing, p.initial
    if control:
        fn, force = _control_problem("affine")
        lam, exact, initial = 0.0, fn, fn
        forcing = lambda x, y, t: force(x, y, t, 0.0)  # noqa: E731
    errors, sizes, counts = [], [], []
    for n in ladder:
        try:
            mesh = p.make_mesh(n)
        except MeshError as exc:
            raise ConfigError(str(exc)) from None
        if control:
            mesh = tag_boundary(mesh, lambda x, y: "N")
        space = fem.build_space(mesh, cfg.degree)
        stepper = RelaxationCN(space, _stepper_config(cfg, lam, forcing))
        state, _ = stepper.run(stepper.init_state(initial))
        errors.append(fem.l2_error(state.U, exact, state.t))
        sizes.append(mesh.h)
        counts.append(len(mesh.triangles))
        log.info("N=%d h=%g error=%.6e", n, mesh.h, errors[-1])
    scale = max(fem.l2_error(fem.Field.zeros(space, complex), exact, cfg.T_final), 1e-300)
    floor = 1e-10 * scale
    rates = _eoc_column(errors, sizes, floor)
    rows = [(c, h, e, r) for c, h, e, r in zip(counts, sizes, errors, rates)]
    print(f"spatial EOC, {p.name}{' (control)' if control else ''}: P{cfg.degree}, k={cfg.k:g}, T={cfg.T_final:g}")
    _print_table(["N", "h", "L2 error", "EOC"], rows)
    if len(errors) >= 2 and min(errors) > floor:
        print(f"least-squares rate {scenarios.least_squares_rate(errors, sizes):.4f}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / f"eoc_space_p{cfg.degree}.csv", ["N", "h", "error", "eoc"], rows)
    return EXIT_OK


def _load_state(path):
    try:
        return output.load_state(path)
    except output.StateFormatError as exc:
        raise ConfigError(str(exc)) from None


def cmd_probe(state_path, y0: float, n: int, out_path=None, compare=None, mirror: bool = False) -> int:
    """Cross section along y = y0; optionally compare |u| with another state's section.

    With ``mirror`` the comparison profile is reflected about the centre of
    the sampled x-interval before the relative L2 difference is taken.
    """
    state = _load_state(state_path)
    if n < 2:
        raise ConfigError("probe needs at least 2 samples")
    try:
        section = scenarios.cross_section(state.U, y0, n)
    except fem.OutsideDomainError as exc:
        raise ConfigError(str(exc)) from None
    if compare is not None:
        other = _load_state(compare)
        try:
            ref = scenarios.cross_section(other.U, y0, n, x_range=(section[0, 0], section[-1, 0]))[:, 1]
        except fem.OutsideDomainError as exc:
            raise ConfigError(f"comparison state: {exc}") from None
        if mirror:
            ref = ref[::-1]
        diff = scenarios.profile_difference(section[:, 1], ref)
        print(f"relative L2 difference of |u|{' (mirrored)' if mirror else ''}: {output.fmt(diff)}",
              file=sys.stderr if not out_path else sys.stdout)
    if out_path:
        output.write_cross_section(out_path, section)
    else:
        print("x,re,im,abs")
        for x, a, re, im in section:
            print(",".join(output.fmt(v) for v in (x, re, im, a)))
    return EXIT_OK


def cmd_mesh_gen(args) -> int:
    if args.structured is not None:
        nx, ny = args.structured
        bbox = args.bbox or (0.0, 1.0, 0.0, 1.0)
        mesh = generate_structured(nx, ny, bbox)
        if args.bc:
            mesh = tag_boundary(mesh, scenarios._bc_rule(args.bc, scenarios.rectangle(*bbox)))
    elif args.polygon is not None:
        vals = args.polygon
        if len(vals) % 2 or len(vals) < 6:
            raise ConfigError("--polygon needs at least three x y pairs")
        poly = list(zip(vals[::2], vals[1::2]))
        if args.target_h is None:
            raise ConfigError("--polygon needs --target-h")
        mesh = delaunay_triangulate(poly, args.target_h)
        if args.bc:
            mesh = tag_boundary(mesh, scenarios._bc_rule(args.bc, poly))
    else:
        try:
            p = scenarios.preset(args.preset or "bright-neumann")
        except scenarios.UnknownPresetError as exc:
            raise ConfigError(str(exc)) from None
        n = args.triangles or (p.triangles if args.full_scale else p.desk.get("triangles", p.triangles))
        mesh = p.make_mesh(n)
    q = quality_report(mesh)
    out = args.out or "mesh.msh"
    write_mesh(mesh, out)
    print(f"{out}: {q.triangle_count} triangles, {len(mesh.points)} vertices, h={q.h:.6g}, "
          f"angles [{q.min_angle:.3f}, {q.max_angle:.3f}] deg")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def _common(sp, default_preset):
    sp.add_argument("--preset", default=None, help=f"experiment preset (default {default_preset})")
    sp.add_argument("--config", help="INI run configuration; command line flags override it")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--degree", type=int, default=None, help="finite element degree, 1 or 2")
    sp.add_argument("--dt", type=float, default=None, help="time step k")
    sp.add_argument("--tfinal", type=float, default=None, help="final time T")
    sp.add_argument("--tol", type=float, default=None, help="relative linear solver tolerance")
    sp.add_argument("--solver", choices=("direct", "iterative"), default=None)
    sp.add_argument("--threads", type=int, default=None, help="limit BLAS threads")
    sp.add_argument("--mesh", default=None, help="mesh file (.msh or text dump) instead of generating one")
    sp.add_argument("--triangles", type=int, default=None, help="approximate triangle count of the generated mesh")
    sp.add_argument("--full-scale", action="store_true", help="use the reference experiment's mesh and time step")
    sp.set_defaults(default_preset=default_preset)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlsrelax", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("mesh-gen", help="generate a mesh file")
    sp.add_argument("--preset", default=None)
    sp.add_argument("--triangles", type=int, default=None)
    sp.add_argument("--full-scale", action="store_true")
    sp.add_argument("--polygon", type=float, nargs="+", default=None, help="x0 y0 x1 y1 ... of a convex polygon")
    sp.add_argument("--target-h", type=float, default=None)
    sp.add_argument("--structured", type=int, nargs=2, metavar=("NX", "NY"), default=None)
    sp.add_argument("--bbox", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"), default=None)
    sp.add_argument("--bc", choices=("dirichlet", "neumann", "mixed"), default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("run", help="run a preset experiment")
    _common(sp, "bright-neumann")
    sp.add_argument("--snapshot-times", type=float, nargs="+", default=None, help="times at which to write snapshots")
    sp.add_argument("--vtk", action="store_true", help="also write legacy VTK snapshots")
    sp.add_argument("--cross-section-y", type=float, default=None, help="write a final cross section at this y")
    sp.add_argument("--cross-section-samples", type=int, default=None)
    sp.add_argument("--record-every", type=int, default=None, help="diagnostics cadence in steps")

    sp = sub.add_parser("eoc-time", help="temporal convergence table")
    _common(sp, "temporal-eoc")
    sp.add_argument("--ladder", type=float, nargs="+", default=None, help="time steps")
    sp.add_argument("--control", action="store_true", help="lam = 0 control with a spatially constant solution")

    sp = sub.add_parser("eoc-space", help="spatial convergence table")
    _common(sp, "spatial-eoc")
    sp.add_argument("--ladder", type=int, nargs="+", default=None, help="triangle counts")
    sp.add_argument("--control", action="store_true", help="lam = 0 control whose solution lies in every V_r")

    sp = sub.add_parser("probe", help="cross section of a saved state")
    sp.add_argument("state")
    sp.add_argument("--y0", type=float, default=0.0)
    sp.add_argument("--n", type=int, default=401)
    sp.add_argument("--out", default=None, help="CSV path (default: standard output)")
    sp.add_argument("--compare", default=None, help="state file whose |u| section is compared")
    sp.add_argument("--mirror", action="store_true", help="reflect the comparison profile in x")
    sp.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with _thread_limit(args.threads):
            if args.command == "mesh-gen":
                return cmd_mesh_gen(args)
            if args.command == "probe":
                return cmd_probe(args.state, args.y0, args.n, args.out, args.compare, args.mirror)
            if args.preset is None and not args.config:
                args.preset = args.default_preset
            cfg = _build_config(args)
            if args.command == "run":
                return cmd_run(cfg)
            ladder = args.ladder
            if args.command == "eoc-time":
                return cmd_eoc_time(cfg, ladder, args.control)
            return cmd_eoc_space(cfg, ladder, args.control)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except BlowupError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
