"""Command-line surface.

One flat ``key = value`` configuration drives every subcommand, and every
key has a default, so a missing config file is itself a valid run.
Overrides stack as flags > environment (``GGR_`` prefix) > file > defaults.
Every artifact starts with a versioned schema line; reruns with the same
effective configuration are byte-identical.

Exit codes: 0 success, 1 verify tolerance failure, 2 configuration error,
3 resource cap.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .diagrams import dump_diagram, enumerate_diagrams, enumerate_ggraphs, is_linked
from .energy import assemble, energy_report
from .errors import CapExceeded, ConfigError, GGRError
from .expansion import (
    Caps,
    TrialStateSpec,
    graded_partial_sums,
    normalization_constant,
    reduced_density,
    series_csv,
)
from .fermi_polyhedron import (
    FermiPolyhedron,
    build_polyhedron,
    dirichlet_l1,
    free_kinetic_reference,
    kinetic_energy,
    lattice_points,
    to_text,
)
from .oracle import brute_normalization, brute_reduced_density
from .scattering import Potential, solve
from .torus import Torus

_POTENTIAL_KINDS = ("zero", "hard_core", "square_well")


@dataclass(frozen=True)
class RunConfig:
    """Effective parameters of one run; field order is the canonical file order."""

    potential: str = "hard_core"
    R0: float = 0.1
    v0: float = 0.0
    L: float = 2.0
    kF_up_ratio: Fraction = Fraction(2)
    kF_dn_ratio: Fraction = Fraction(2)
    s_up: int = 8
    s_dn: int = 8
    b: float = 0.5
    grid_M: int = 10
    k_max: int = 1
    ng_max: int = 2
    vertex_cap: int = 8
    max_internal: int = 2
    K: int = 2
    threads: int = 1
    out_dir: str = "."
    tolerance: float = 1e-3


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, text: str):
    kind = _TYPES[key]
    if kind is Fraction or kind == "Fraction":
        return Fraction(text)
    if kind is float or kind == "float":
        return float(text)
    if kind is int or kind == "int":
        return int(text)
    return text


def _format_value(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def print_config(cfg: RunConfig) -> str:
    """Canonical text form; parse followed by print is the identity."""
    lines = ["# ggr-config v1"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def _parse_items(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rhs = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key = key.strip()
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, rhs.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def _validate(cfg: RunConfig) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ConfigError(msg)

    need(cfg.potential in _POTENTIAL_KINDS,
         f"potential must be one of {_POTENTIAL_KINDS}, got {cfg.potential!r}")
    need(cfg.L > 0, "L must be positive")
    need(cfg.b > 0, "b must be positive")
    need(cfg.b <= cfg.L / 2, "b must not exceed L/2")
    if cfg.potential != "zero":
        need(cfg.R0 > 0, "R0 must be positive")
        need(cfg.R0 < cfg.b, "R0 must lie inside the cutoff b")
    need(cfg.v0 >= 0, "v0 must be non-negative")
    need(cfg.kF_up_ratio > 0 and cfg.kF_dn_ratio > 0, "Fermi ratios must be positive")
    need(cfg.s_up >= 8 and cfg.s_up % 8 == 0, "s_up must be a positive multiple of 8")
    need(cfg.s_dn >= 8 and cfg.s_dn % 8 == 0, "s_dn must be a positive multiple of 8")
    need(cfg.grid_M >= 2, "grid_M must be at least 2")
    need(cfg.k_max >= 0 and cfg.ng_max >= 0 and cfg.max_internal >= 0,
         "caps must be non-negative")
    need(cfg.vertex_cap >= 1, "vertex_cap must be positive")
    need(cfg.K >= 1, "K must be at least 1")
    need(cfg.threads >= 1, "threads must be at least 1")
    need(cfg.tolerance > 0, "tolerance must be positive")


def make_config(**overrides) -> RunConfig:
    try:
        cfg = RunConfig(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    return make_config(**_parse_items(text))


_ENV_PREFIX = "GGR_"


def env_overrides(environ=None) -> dict:
    env = os.environ if environ is None else environ
    out = {}
    for name in _TYPES:
        var = _ENV_PREFIX + name.upper()
        if var in env:
            try:
                out[name] = _parse_value(name, env[var])
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{var}: bad value: {exc}") from None
    return out


def load_config(path=None, environ=None, flag_overrides=None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(_parse_items(text))
    values.update(env_overrides(environ))
    values.update(flag_overrides or {})
    return make_config(**values)


# ---------------------------------------------------------------------------
# shared construction


def _potential(cfg: RunConfig) -> Potential:
    if cfg.potential == "zero":
        return Potential.zero()
    if cfg.potential == "hard_core":
        return Potential.hard_core(cfg.R0)
    return Potential.square_well(cfg.v0, cfg.R0)


def _caps(cfg: RunConfig) -> Caps:
    return Caps(max_internal=cfg.max_internal, k_max=cfg.k_max,
                ng_max=cfg.ng_max, vertex_cap=cfg.vertex_cap)


def _build_state(cfg: RunConfig) -> TrialStateSpec:
    torus = Torus(cfg.L, cfg.grid_M)
    sol = solve(_potential(cfg), cfg.b, torus)
    unit_up = build_polyhedron(cfg.s_up)
    unit_dn = unit_up if cfg.s_dn == cfg.s_up else build_polyhedron(cfg.s_dn)
    pf_up = lattice_points(unit_up, cfg.kF_up_ratio, cfg.L)
    pf_dn = lattice_points(unit_dn, cfg.kF_dn_ratio, cfg.L)
    return TrialStateSpec(pf_up, pf_dn, sol, torus)


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_scattering(cfg: RunConfig, out: Path) -> int:
    sol = solve(_potential(cfg), cfg.b, Torus(cfg.L, cfg.grid_M))
    r = np.linspace(0.0, cfg.b, 401)[1:]
    table = np.column_stack([
        r,
        sol.f_s(r), sol.f_prime("s", r), sol.g_s(r),
        sol.f_p(r), sol.f_prime("p", r), sol.g_p(r),
    ])
    lines = [
        "# ggr-scattering v1",
        f"# a = {sol.a!r}",
        f"# a_p = {sol.a_p!r}",
        f"# b = {sol.b!r}",
        "r,f_s,f_s_prime,g_s,f_p,f_p_prime,g_p",
    ]
    lines += [",".join(repr(float(x)) for x in row) for row in table]
    _write(out / "scattering.csv", "\n".join(lines) + "\n")
    print(f"a = {sol.a!r}  a_p = {sol.a_p!r}")
    return 0


def _cmd_polyhedron(cfg: RunConfig, out: Path) -> int:
    unit_up = build_polyhedron(cfg.s_up)
    unit_dn = unit_up if cfg.s_dn == cfg.s_up else build_polyhedron(cfg.s_dn)
    diag = {"schema": "ggr-polyhedron v1"}
    for tag, unit, ratio in (("up", unit_up, cfg.kF_up_ratio),
                             ("dn", unit_dn, cfg.kF_dn_ratio)):
        pf = lattice_points(unit, ratio, cfg.L)
        _write(out / f"polyhedron_{tag}.txt", to_text(pf))
        rep = dirichlet_l1(pf, Torus(cfg.L, max(4 * pf.max_index() + 2, 8)), ())
        diag[tag] = {
            "N": pf.N,
            "s": unit.s,
            "kf_ratio": str(ratio),
            "max_index": pf.max_index(),
            "rho": pf.rho,
            "kinetic": kinetic_energy(pf),
            "kinetic_reference": free_kinetic_reference(pf),
            "dirichlet_l1": rep.value,
            "dirichlet_reference": rep.reference,
        }
        print(f"{tag}: N = {pf.N}  kinetic = {kinetic_energy(pf)!r}")
    _write(out / "polyhedron.json", json.dumps(diag, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_diagrams(cfg: RunConfig, out: Path, pqnm) -> int:
    p, q, n, m = pqnm
    graphs = enumerate_ggraphs(p, q, n, m, cap=cfg.vertex_cap)
    diags = enumerate_diagrams(p, q, n, m, cap=cfg.vertex_cap)
    linked = sum(1 for d in diags if is_linked(d))
    lines = [
        "# ggr-diagrams v1",
        f"# p q n m = {p} {q} {n} {m}",
        f"# graphs = {len(graphs)}",
        f"# diagrams = {len(diags)}",
        f"# linked = {linked}",
    ]
    lines += [dump_diagram(d) for d in diags]
    _write(out / "diagrams.txt", "\n".join(lines) + "\n")
    print(f"graphs = {len(graphs)}  diagrams = {len(diags)}  linked = {linked}")
    return 0


def _cmd_expand(cfg: RunConfig, out: Path) -> int:
    spec = _build_state(cfg)
    caps = _caps(cfg)
    norm = normalization_constant(spec, caps)
    ext = [[0.0, 0.0, 0.0], [cfg.L / 4.0, 0.0, 0.0]]
    dens = graded_partial_sums(spec, 1, 1, ext, caps, linked_only=True)
    _write(out / "series.csv", series_csv([norm.finite_series, norm.linked_series, dens]))
    finite_reduced = 1.0 + norm.finite_series.total().real
    linked_reduced = math.exp(norm.linked_sum) if norm.linked_sum < 709.0 else math.inf
    print(f"linked exponent = {norm.linked_sum!r}  tail = {norm.tail!r}")
    print(f"C / (N_up! N_dn!): linked = {linked_reduced!r}  "
          f"finite partial = {finite_reduced!r}")
    return 0


def _cmd_energy(cfg: RunConfig, out: Path) -> int:
    spec = _build_state(cfg)
    bd = assemble(spec, K=cfg.K, threads=cfg.threads)
    # hash the physics configuration only: where the files land and how many
    # workers ran cannot change the numbers
    hashed = replace(cfg, out_dir=".", threads=1)
    _write(out / "energy.json", energy_report(bd, config_text=print_config(hashed)))
    print(f"estimate = {float(bd.estimate)!r}")
    print(f"interaction density = {float(bd.interaction_density)!r}  "
          f"ratio to contact = {float(bd.ratio_to_contact)!r}")
    return 0


def _frontier(series) -> float:
    """Magnitude of the highest retained orders; stands in for the dropped tail."""
    edge = [abs(c.value) for c in series.cells
            if c.ng_total >= series.caps.ng_max or c.k >= series.caps.k_max]
    return float(sum(edge))


def _verify_row(name, expansion, oracle, tol, extra):
    resid = abs(expansion - oracle)
    allowance = tol * abs(oracle) + extra
    return (name, float(expansion), float(oracle), resid, allowance, resid <= allowance)


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    v = _potential(cfg)
    tol = cfg.tolerance
    caps = _caps(cfg)
    rows = []

    tor = Torus(cfg.L, min(cfg.grid_M, 16))
    sol = solve(v, cfg.b, tor)
    one = FermiPolyhedron.from_points([[0, 0, 0]], cfg.L)
    two = FermiPolyhedron.from_points([[0, 0, 0], [1, 0, 0]], cfg.L)
    empty = FermiPolyhedron.from_points(np.zeros((0, 3), dtype=int), cfg.L)

    spec11 = TrialStateSpec(one, one, sol, tor)
    rows.append(_verify_row("C(1,1)", normalization_constant(spec11, caps).finite_sum,
                            brute_normalization(spec11), tol, 0.0))

    spec20 = TrialStateSpec(two, empty, sol, tor)
    rows.append(_verify_row("C(2,0)", normalization_constant(spec20, caps).finite_sum,
                            brute_normalization(spec20), tol, 0.0))

    # density rows on a coarser grid; the frontier cells of the linked series
    # stand in for the truncated remainder in the allowance
    tor2 = Torus(cfg.L, min(cfg.grid_M, 10))
    sol2 = solve(v, cfg.b, tor2)
    spec_d = TrialStateSpec(one, one, sol2, tor2)
    caps_d = replace(caps, max_internal=min(caps.max_internal, 2))
    oracle_norm = brute_normalization(spec_d)
    # first two separations sit inside the pair-factor support at default b
    for frac in (0.1, 0.2, 0.5):
        ext = [[0.0, 0.0, 0.0], [frac * cfg.L, 0.0, 0.0]]
        e = reduced_density(spec_d, 1, 1, ext, caps_d)
        o = brute_reduced_density(spec_d, 1, 1, ext, normalization=oracle_norm)
        extra = _frontier(graded_partial_sums(spec_d, 1, 1, ext, caps_d, linked_only=True))
        rows.append(_verify_row(f"rho(1,1)[{frac}L]", e, o, tol, extra))

    lines = [
        "# ggr-verify v1",
        f"# tolerance = {tol!r}",
        "target,expansion,oracle,residual,allowance,status",
    ]
    failed = False
    for name, e, o, resid, allow, ok in rows:
        failed = failed or not ok
        lines.append(f"{name},{e!r},{o!r},{resid!r},{allow!r},{'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    _write(out / "verify.csv", text)
    sys.stdout.write(text)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# driver

_RUNNERS = {
    "scattering": _cmd_scattering,
    "polyhedron": _cmd_polyhedron,
    "expand": _cmd_expand,
    "energy": _cmd_energy,
    "verify": _cmd_verify,
}


def run(command: str, cfg: RunConfig, out=None, pqnm=None) -> int:
    """Execute one subcommand against an already-built configuration."""
    out_dir = Path(cfg.out_dir if out is None else out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if command == "diagrams":
        return _cmd_diagrams(cfg, out_dir, tuple(pqnm) if pqnm else (2, 1, 0, 0))
    if command not in _RUNNERS:
        raise ConfigError(f"unknown subcommand {command!r}")
    return _RUNNERS[command](cfg, out_dir)


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", default=None,
                        help="key = value configuration file")
    shared.add_argument("--threads", metavar="N", type=int, default=None)
    shared.add_argument("--out", metavar="DIR", default=None)
    shared.add_argument("--cap-vertices", metavar="N", type=int, default=None)
    shared.add_argument("--order-K", metavar="N", type=int, default=None)
    shared.add_argument("--grid-M", metavar="N", type=int, default=None)

    parser = argparse.ArgumentParser(
        prog="ggr", description="cluster expansion for dilute spin-1/2 trial states")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scattering", parents=[shared],
                   help="solve both channels, write the radial table")
    sub.add_parser("polyhedron", parents=[shared],
                   help="build the momentum sets, write text + diagnostics")
    d = sub.add_parser("diagrams", parents=[shared],
                       help="enumerate diagrams for p q n m (default 2 1 0 0)")
    d.add_argument("pqnm", nargs="*", type=int, metavar="N",
                   help="four integers: internal blacks/whites, external blacks/whites")
    sub.add_parser("expand", parents=[shared],
                   help="normalization and one-body series tables")
    sub.add_parser("energy", parents=[shared], help="full energy report")
    sub.add_parser("verify", parents=[shared],
                   help="expansion against brute-force on tiny systems")
    return parser


def _flag_overrides(args) -> dict:
    pairs = (
        ("threads", args.threads),
        ("out_dir", args.out),
        ("vertex_cap", args.cap_vertices),
        ("K", args.order_K),
        ("grid_M", args.grid_M),
    )
    return {key: val for key, val in pairs if val is not None}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    pqnm = getattr(args, "pqnm", None)
    if pqnm:
        if len(pqnm) != 4 or any(x < 0 for x in pqnm):
            print("diagrams expects four non-negative integers: p q n m", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config, flag_overrides=_flag_overrides(args))
        return run(args.command, cfg, pqnm=pqnm)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except GGRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
