"""Batch front end: ``gradpd <config> [--out DIR] [--quiet] [--threads N]``.

A config is a flat list of ``key = value`` lines with ``#`` comments and
dot-namespaced keys. Each command writes one CSV with a fixed column set;
floats use the shortest round-trip representation so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fields as fl
from .errors import ConfigError, GradPDError
from .identities import report_passed, tolerance_for, verification_suite
from .interaction import Kernel, VirtualField
from .lattice import build_lattice
from .moments import expansion_residual, moment_tensors
from .simulate import BodyForce, horizon_convergence_study, run, stable_dt

__all__ = ["ScenarioConfig", "RunReport", "Check", "parse_config", "run_scenario", "main"]

COMMANDS = ("verify", "moments", "expand", "simulate", "converge")
FIELD_KINDS = ("identity", "affine", "shear2", "trig")


# -- value parsers ------------------------------------------------------------


def _floats(text: str) -> list[float]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("expected numbers")
    vals = [float(p) for p in parts]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("non-finite value")
    return vals


def _number(text):
    (v,) = _floats(text)
    return v


def _positive(text):
    v = _number(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _count(text):
    v = int(text.strip())
    if v < 0:
        raise ValueError("must be non-negative")
    return v


def _posint(text):
    v = int(text.strip())
    if v < 1:
        raise ValueError("must be at least 1")
    return v


def _vec3(text):
    v = _floats(text)
    if len(v) != 3:
        raise ValueError("expected 3 numbers")
    return tuple(v)


def _matrix(text):
    """Rows separated by ';' (a bare list of 9 numbers is also accepted)."""
    rows = [r for r in text.split(";") if r.strip()]
    if len(rows) == 1:
        v = _floats(rows[0])
        if len(v) == 9:
            return tuple(tuple(v[3 * k : 3 * k + 3]) for k in range(3))
        if len(v) == 3:
            return (tuple(v),)
        raise ValueError("expected 3 or 9 numbers")
    return tuple(_vec3(r) for r in rows)


def _list(conv):
    def parse(text):
        return tuple(conv(p) for p in text.replace(",", " ").split())

    return parse


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return parse


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


# key -> (parser, default); a default of None means "no default"
SCHEMA = {
    "command": (_choice(*COMMANDS), None),
    "field": (_choice(*FIELD_KINDS), "identity"),
    "field.gamma": (_number, None),
    "field.F": (_matrix, None),
    "field.shift": (_vec3, (0.0, 0.0, 0.0)),
    "field.amplitude": (_matrix, None),
    "field.wavevector": (_matrix, None),
    "field.phase": (_list(_number), None),
    "field.box.lo": (_vec3, (-1.0, -1.0, -1.0)),
    "field.box.hi": (_vec3, (1.0, 1.0, 1.0)),
    "kernel": (_choice("micro-elastic", "gaussian", "uniform"), "micro-elastic"),
    "kernel.c": (_positive, 1.0),
    "kernel.delta": (_positive, None),
    "kernel.ell": (_positive, None),
    "kernel.influence": (_choice("constant", "linear"), "constant"),
    "kernel.support": (_choice("ball", "box"), "ball"),
    "lattice.box.lo": (_vec3, (0.0, 0.0, 0.0)),
    "lattice.box.hi": (_vec3, (1.0, 1.0, 1.0)),
    "lattice.h": (_positive, None),
    "lattice.m": (_positive, 3.0),
    "lattice.mu": (_positive, 1.0),
    "run.dt": (_positive, None),
    "run.steps": (_count, 100),
    "run.seed": (_count, 0),
    "run.points": (_posint, 20),
    "run.fd_step": (_positive, 1e-2),
    "run.tol.momentum": (_positive, 1e-12),
    "run.tol.energy": (_positive, 1e-3),
    "run.tol.min_order": (_number, None),
    "moments.point": (_vec3, (0.0, 0.0, 0.0)),
    "moments.nmax": (_posint, 4),
    "moments.resolution": (_posint, 32),
    "expand.point": (_vec3, (0.0, 0.0, 0.0)),
    "expand.nmax": (_list(_posint), (2, 3, 4)),
    "expand.horizons": (_list(_positive), None),
    "expand.resolution": (_posint, 24),
    "expand.check_nested": (_bool, False),
    "virtual": (_choice("translation", "affine", "trig"), "trig"),
    "virtual.F": (_matrix, None),
    "virtual.vector": (_vec3, None),
    "virtual.amplitude": (_matrix, ((0.5, -0.2, 0.3),)),
    "virtual.wavevector": (_matrix, ((0.9, -1.2, 0.6),)),
    "virtual.phase": (_list(_number), (0.4,)),
    "virtual.eps": (_positive, 1.0),
    "velocity.amplitude": (_matrix, None),
    "velocity.wavevector": (_matrix, None),
    "velocity.phase": (_list(_number), None),
    "body.force": (_vec3, (0.0, 0.0, 0.0)),
    "converge.h": (_list(_positive), None),
    "converge.center": (_vec3, None),
    "converge.points": (_choice("block", "center"), "block"),
    "converge.scale_stiffness": (_bool, True),
}

REQUIRED = {
    "verify": (),
    "moments": ("kernel.delta",),
    "expand": ("kernel.delta", "expand.horizons"),
    "simulate": ("lattice.h",),
    "converge": ("converge.h",),
}

FIELD_REQUIRED = {
    "identity": (),
    "affine": ("field.F",),
    "shear2": ("field.gamma",),
    "trig": ("field.amplitude", "field.wavevector"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Typed configuration; ``values`` holds every schema key after defaults."""

    command: str
    values: dict
    explicit: frozenset = frozenset()

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``key = value`` lines; errors name the offending line."""
    seen: dict[str, int] = {}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if "command" not in values:
        raise ConfigError("missing required key 'command'")
    command = values["command"]
    resolved = {k: values.get(k, default) for k, (_, default) in SCHEMA.items()}
    missing = [k for k in REQUIRED[command] + FIELD_REQUIRED[resolved["field"]] if resolved[k] is None]
    if resolved["kernel"] == "gaussian" and command != "verify" and resolved["kernel.ell"] is None:
        missing.append("kernel.ell")
    if missing:
        raise ConfigError(f"missing required key(s) for {command}: {', '.join(missing)}")
    for lo_key, hi_key in (("field.box.lo", "field.box.hi"), ("lattice.box.lo", "lattice.box.hi")):
        if any(a >= b for a, b in zip(resolved[lo_key], resolved[hi_key])):
            line = seen.get(hi_key, seen.get(lo_key))
            where = f"line {line}: " if line else ""
            raise ConfigError(f"{where}{lo_key} must be below {hi_key} on every axis")
    return ScenarioConfig(command, resolved, frozenset(values))


# -- report -------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    duration: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, tolerance: float, passed: bool):
        if any(c.name == name for c in self.checks):
            raise ValueError(f"check {name!r} recorded twice")
        self.checks.append(Check(name, float(value), float(tolerance), bool(passed)))

    def render(self) -> str:
        lines = [f"command: {self.command}"]
        for k in sorted(self.config):
            v = self.config[k]
            if v is not None:
                lines.append(f"  {k} = {_fmt_value(v)}")
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"{mark} {c.name}: {c.value!r} (tolerance {c.tolerance!r})")
        lines.extend(f"note: {n}" for n in self.notes)
        lines.extend(f"wrote {p}" for p in self.outputs)
        lines.append(f"duration: {self.duration:.3f} s")
        lines.append("result: " + ("all checks passed" if self.passed else "some checks failed"))
        return "\n".join(lines)


def _fmt_value(v):
    if isinstance(v, tuple):
        return " ".join(_fmt_value(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# -- scenario builders ---------------------------------------------------------


def _field(cfg: ScenarioConfig) -> fl.PlacementField:
    box = fl.Box(cfg["field.box.lo"], cfg["field.box.hi"])
    kind = cfg["field"]
    if kind == "identity":
        return fl.identity(box)
    if kind == "affine":
        return fl.affine(cfg["field.F"], box, cfg["field.shift"])
    if kind == "shear2":
        return fl.quadratic_shear(cfg["field.gamma"], box)
    A, K = np.array(cfg["field.amplitude"]), np.array(cfg["field.wavevector"])
    phases = cfg.get("field.phase", (0.0,) * len(A))
    if len(phases) != len(A):
        raise ConfigError("field.phase needs one entry per amplitude row")
    return fl.trigonometric(A, K, phases, box)


def _kernel(cfg: ScenarioConfig, delta=None) -> Kernel:
    return Kernel(
        family=cfg["kernel"],
        c=cfg["kernel.c"],
        delta=delta if delta is not None else cfg["kernel.delta"],
        ell=cfg["kernel.ell"],
        influence=cfg["kernel.influence"],
        support=cfg["kernel.support"],
    )


def _virtual(cfg: ScenarioConfig) -> VirtualField:
    kind, eps = cfg["virtual"], cfg["virtual.eps"]
    if kind == "translation":
        if cfg["virtual.vector"] is None:
            raise ConfigError("missing required key 'virtual.vector'")
        return VirtualField.translation(cfg["virtual.vector"], eps)
    if kind == "affine":
        if cfg["virtual.F"] is None:
            raise ConfigError("missing required key 'virtual.F'")
        return VirtualField(fl.AffineMap(cfg["virtual.F"], np.zeros(3)), eps)
    A = np.array(cfg["virtual.amplitude"])
    return VirtualField(
        fl.TrigonometricMap(A, np.array(cfg["virtual.wavevector"]), np.array(cfg["virtual.phase"]), with_identity=False),
        eps,
    )


# -- commands -------------------------------------------------------------------


def _cmd_verify(cfg, report, out, threads):
    pf = _field(cfg)
    rng = np.random.default_rng(cfg["run.seed"])
    width = float(np.min(np.subtract(pf.box.hi, pf.box.lo)))
    margin = max(4.0 * cfg["run.fd_step"], 0.05 * width)
    rows = []
    worst: dict[str, list] = {}
    for X in pf.box.sample(rng, cfg["run.points"], margin):
        for r in verification_suite(pf, X, cfg["run.fd_step"]):
            passed = report_passed(r)
            rows.append((r.name, *r.point, r.lhs, r.rhs, r.abs_residual, r.rel_residual, passed))
            tol, kind = tolerance_for(r.name)
            value = r.rel_residual if kind == "rel" else r.abs_residual
            entry = worst.setdefault(r.name, [0.0, tol, True])
            entry[0] = max(entry[0], value)
            entry[2] &= passed
    for name, (value, tol, passed) in worst.items():
        report.add(name, value, tol, passed)
    path = out / "identities.csv"
    header = ("name", "point_x", "point_y", "point_z", "lhs", "rhs", "abs_residual", "rel_residual", "pass")
    _write_csv(path, header, rows)
    report.outputs.append(str(path))


def _cmd_moments(cfg, report, out, threads):
    pf = _field(cfg)
    ms = moment_tensors(_kernel(cfg), cfg["moments.point"], pf, cfg["moments.nmax"], cfg["moments.resolution"], cfg["lattice.mu"])
    report.notes.extend(ms.warnings)
    rows = []
    for n in sorted(ms.tensors):
        for m, v in ms[n].items():
            rows.append((n, str(m), v))
    report.add("moments_finite", 0.0, 0.0, all(math.isfinite(v) for _, _, v in rows))
    path = out / "moments.csv"
    _write_csv(path, ("order", "multiindex", "value"), rows)
    report.outputs.append(str(path))


def _cmd_expand(cfg, report, out, threads):
    pf = _field(cfg)
    dchi = _virtual(cfg)
    k = _kernel(cfg)
    table = {}
    rows = []
    for nmax in cfg["expand.nmax"]:
        res = expansion_residual(pf, dchi, k, cfg["expand.point"], nmax, cfg["expand.horizons"], cfg["expand.resolution"], cfg["lattice.mu"])
        table[nmax] = res
        rows.extend((r.horizon, r.nmax, r.full_work, r.truncated_work, r.residual, r.est_order) for r in res)
    report.add("expansion_finite", 0.0, 0.0, all(math.isfinite(r[4]) for r in rows))
    min_order = cfg["run.tol.min_order"]
    if min_order is not None and 2 in table:
        orders = [r.est_order for r in table[2][1:]]
        report.add("nmax2_order", min(orders), min_order, all(o >= min_order for o in orders))
    if cfg["expand.check_nested"]:
        keys = sorted(table)
        ok = True
        for a, b in zip(keys, keys[1:]):
            ok &= all(rb.residual <= ra.residual for ra, rb in zip(table[a], table[b]))
        report.add("nested_residuals", 0.0, 0.0, ok)
    path = out / "expand.csv"
    _write_csv(path, ("horizon", "nmax", "full_work", "truncated_work", "residual", "est_order"), rows)
    report.outputs.append(str(path))


def _cmd_simulate(cfg, report, out, threads):
    h = cfg["lattice.h"]
    delta = cfg["kernel.delta"] or cfg["lattice.m"] * h
    box = fl.Box(cfg["lattice.box.lo"], cfg["lattice.box.hi"])
    system = build_lattice(box, h, delta, cfg["lattice.mu"])
    if cfg["field"] != "identity" or "field.box.lo" in cfg.explicit:
        system = system.with_placement(_field(cfg))
    if cfg["velocity.amplitude"] is not None:
        A = np.array(cfg["velocity.amplitude"])
        K = np.array(cfg.get("velocity.wavevector", np.zeros_like(A)))
        P = np.array(cfg.get("velocity.phase", (0.0,) * len(A)))
        system = system.with_state(vel=fl.TrigonometricMap(A, K, P, with_identity=False).value(system.ref))
    kernel = _kernel(cfg, delta)
    body_vec = np.array(cfg["body.force"])
    body = BodyForce.uniform(body_vec) if np.any(body_vec != 0) else BodyForce.zero()
    dt = cfg["run.dt"] or stable_dt(system, kernel)
    if not math.isfinite(dt):
        raise ConfigError("no bonds: set run.dt explicitly")
    final, trace = run(system, kernel, body, dt, cfg["run.steps"], threads=threads)
    rows = [(r.step, r.time, *r.momentum, r.kinetic, r.potential, r.total) for r in trace.records]
    if body.fn is None:
        P = trace.momentum
        speed = max(float(np.max(np.linalg.norm(system.vel, axis=1))), float(np.max(np.sqrt(2 * trace.column("kinetic") / np.sum(system.mass)))))
        scale = float(np.sum(system.mass)) * max(speed, 1e-300)
        drift = float(np.max(np.linalg.norm(P - P[0], axis=1))) / scale
        tol_p = cfg["run.tol.momentum"]
        report.add("momentum_drift", drift, tol_p, drift <= tol_p)
        E = trace.column("total")
        if E[0] != 0:
            edrift = float(np.max(np.abs(E - E[0]))) / abs(E[0])
            tol_e = cfg["run.tol.energy"]
            report.add("energy_drift", edrift, tol_e, edrift <= tol_e)
    report.notes.append(f"dt = {dt!r}, particles = {system.n}")
    path = out / "trace.csv"
    _write_csv(path, ("step", "time", "px", "py", "pz", "kinetic", "potential", "total_energy"), rows)
    report.outputs.append(str(path))


def _cmd_converge(cfg, report, out, threads):
    pf = _field(cfg)
    hs = cfg["converge.h"]
    m = cfg["lattice.m"]
    kernel = _kernel(cfg, m * hs[0])
    offsets = [[0.0, 0.0, 0.0]] if cfg["converge.points"] == "center" else None
    rows = horizon_convergence_study(
        pf, kernel, hs, m=m, center=cfg["converge.center"], offsets=offsets,
        mu=cfg["lattice.mu"], scale_stiffness=cfg["converge.scale_stiffness"], threads=threads,
    )
    errs = [r.max_error for r in rows]
    scale = max(errs)
    if scale > 1e-13:
        report.add("error_decreasing", 0.0, 0.0, all(b < a for a, b in zip(errs, errs[1:])))
        min_order = cfg.get("run.tol.min_order", 1.5)
        order = rows[-1].est_order
        report.add("finest_order", order, min_order, order >= min_order)
    else:
        report.add("error_at_roundoff", scale, 1e-13, True)
    path = out / "converge.csv"
    _write_csv(path, ("horizon", "h", "max_error", "est_order"), [(r.horizon, r.h, r.max_error, r.est_order) for r in rows])
    report.outputs.append(str(path))


_DISPATCH = {
    "verify": ("identities.verification_suite", _cmd_verify),
    "moments": ("moments.moment_tensors", _cmd_moments),
    "expand": ("moments.expansion_residual", _cmd_expand),
    "simulate": ("simulate.run", _cmd_simulate),
    "converge": ("simulate.horizon_convergence_study", _cmd_converge),
}


class ScenarioError(GradPDError):
    """A downstream failure, labelled with the module operation."""


def run_scenario(cfg: ScenarioConfig, out_dir, threads: int = 1) -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(cfg.command, dict(cfg.values))
    op, fn = _DISPATCH[cfg.command]
    t0 = time.perf_counter()
    try:
        fn(cfg, report, out, threads)
    except ConfigError:
        raise
    except GradPDError as exc:
        raise ScenarioError(f"{op}: {type(exc).__name__}: {exc}") from exc
    finally:
        report.duration = time.perf_counter() - t0
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gradpd", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="scenario config file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--quiet", action="store_true", help="suppress the run report")
    parser.add_argument("--threads", type=int, default=1, help="force-loop threads (default 1)")
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        cfg = parse_config(Path(args.config).read_text())
        report = run_scenario(cfg, args.out, args.threads)
    except (ConfigError, OSError) as exc:
        print(f"gradpd: config error: {exc}", file=sys.stderr)
        return 2
    except GradPDError as exc:
        print(f"gradpd: error in {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(report.render())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
