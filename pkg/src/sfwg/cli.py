"""Command-line front end: ``sfwg mesh|solve|convergence``.

Exit codes are 0 on success, 2 for configuration errors, 3 for solver
failures and 4 for mesh errors.  Options may also come from a ``key = value``
file given with ``--config``; flags on the command line take precedence.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError, MeshError, SolverError, WGError
from .mesh import FAMILIES, generate, validate
from .poly import KappaMatrix, Poly2
from .problem import CASES, ModelCase
from .study import energy_norm, error_norms, run_convergence
from .system import assemble, solve
from .weakops import DEGREE_RULES, WGSpace

log = logging.getLogger("sfwg")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MESH = 0, 2, 3, 4
K_RANGE = (2, 6)

DEFAULTS = {
    "family": "tri",
    "k": 2,
    "case": "s1",
    "solver": "direct",
    "format": "table",
    "degrees": "uniform",
    "condense": False,
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: str
    levels: tuple
    k: int
    case: ModelCase
    r1: Optional[int] = None
    r2: Optional[int] = None
    degrees: str = "uniform"
    solver: str = "direct"
    condense: bool = False
    out: Optional[Path] = None
    format: str = "table"
    threads: Optional[int] = None
    dump_system: Optional[Path] = None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value.strip("\"'")
    return values


def _levels(text: str) -> tuple:
    try:
        if ":" in text:
            a, b = (int(s) for s in text.split(":"))
            levels = tuple(range(a, b + 1))
        else:
            levels = tuple(int(s) for s in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad level range {text!r}; expected A:B") from exc
    if not levels or list(levels) != sorted(set(levels)):
        raise ConfigurationError(f"levels must be nonempty and ascending, got {text!r}")
    return levels


def _int(name: str, value) -> Optional[int]:
    if value is None or isinstance(value, int):
        return value
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigurationError(f"--{name.replace('_', '-')} expects an integer, got {value!r}") from exc


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).lower() in ("1", "true", "yes", "on")


def _kappa(text: str) -> KappaMatrix:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ConfigurationError(f"--kappa expects three entries 'a b c', got {text!r}")
    try:
        return KappaMatrix(*(float(p) for p in parts))
    except ValueError as exc:
        raise ConfigurationError(f"--kappa: {exc}") from exc


def _choice(name: str, value: str, allowed) -> str:
    if value not in allowed:
        raise ConfigurationError(f"--{name} must be one of {', '.join(sorted(allowed))}, got {value!r}")
    return value


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags, config file and defaults into a validated :class:`RunConfig`."""
    opts = {k: v for k, v in vars(args).items() if v is not None}
    if args.config:
        merged = read_config_file(args.config)
        merged.update(opts)
        opts = merged
    for key, value in DEFAULTS.items():
        opts.setdefault(key, value)

    family = _choice("family", opts["family"], FAMILIES)
    k = _int("k", opts["k"])
    if not K_RANGE[0] <= k <= K_RANGE[1]:
        raise ConfigurationError(f"--k must be in [{K_RANGE[0]}, {K_RANGE[1]}], got {k}")

    if "levels" in opts:
        levels = _levels(str(opts["levels"]))
    elif "level" in opts:
        levels = (_int("level", opts["level"]),)
    else:
        raise ConfigurationError("a mesh level is required (--level N or --levels A:B)")
    if args.command != "convergence" and len(levels) != 1:
        raise ConfigurationError(f"{args.command} takes a single --level")

    name = _choice("case", opts["case"], set(CASES) | {"custom"})
    if name == "custom":
        if "u" not in opts:
            raise ConfigurationError("--case custom needs --u 'a,b,coeff;...'")
        base = ModelCase("custom", KappaMatrix.identity(), 1.0, Poly2.parse(str(opts["u"])))
    else:
        base = CASES[name]
        if "u" in opts:
            base = ModelCase(name, base.kappa, base.mu, Poly2.parse(str(opts["u"])))
    kappa = _kappa(str(opts["kappa"])) if "kappa" in opts else base.kappa
    try:
        mu = float(opts["mu"]) if "mu" in opts else base.mu
    except ValueError as exc:
        raise ConfigurationError(f"--mu expects a number, got {opts['mu']!r}") from exc
    if mu < 0.0:
        raise ConfigurationError(f"--mu must be >= 0, got {mu}")
    case = base if (kappa, mu) == (base.kappa, base.mu) else ModelCase(base.name, kappa, mu, base.u)

    r1, r2 = _int("r1", opts.get("r1")), _int("r2", opts.get("r2"))
    if r1 is not None and r1 < k:
        raise ConfigurationError(f"--r1 must be >= k={k}, got {r1}")
    if r2 is not None and r2 < k - 1:
        raise ConfigurationError(f"--r2 must be >= k-1={k - 1}, got {r2}")
    threads = _int("threads", opts.get("threads"))
    if threads is not None and threads < 1:
        raise ConfigurationError(f"--threads must be >= 1, got {threads}")

    return RunConfig(
        command=args.command,
        family=family,
        levels=levels,
        k=k,
        case=case,
        r1=r1,
        r2=r2,
        degrees=_choice("degrees", opts["degrees"], DEGREE_RULES),
        solver=_choice("solver", opts["solver"], {"direct", "cg"}),
        condense=_bool(opts["condense"]),
        out=Path(opts["out"]) if "out" in opts else None,
        format=_choice("format", opts["format"], {"table", "csv"}),
        threads=threads,
        dump_system=Path(opts["dump_system"]) if "dump_system" in opts else None,
    )


def cmd_mesh(cfg: RunConfig) -> int:
    mesh = generate(cfg.family, cfg.levels[0])
    problems = validate(mesh)
    if problems:
        raise MeshError("; ".join(str(v) for v in problems[:5]))
    if cfg.out is not None:
        mesh.dump(cfg.out)
    print(mesh.summary())
    return EXIT_OK


def _degree_lines(space: WGSpace) -> list:
    lines = []
    for n, convex, r1, r2 in space.degrees_used():
        shape = f"N={n} {'convex' if convex else 'non-convex'}"
        lines.append(f"degrees[{shape}]: r1={r1} r2={r2}")
    return lines


def cmd_solve(cfg: RunConfig) -> int:
    level = cfg.levels[0]
    t0 = time.perf_counter()
    mesh = generate(cfg.family, level)
    space = WGSpace(mesh, cfg.k, cfg.case.kappa, r1=cfg.r1, r2=cfg.r2, threads=cfg.threads, degrees=cfg.degrees)
    t1 = time.perf_counter()
    system = assemble(space, cfg.case.problem, threads=cfg.threads)
    t2 = time.perf_counter()
    uh = solve(system, cfg.solver, condense=cfg.condense)
    t3 = time.perf_counter()
    if cfg.dump_system is not None:
        system.dump(cfg.dump_system)
    e_l2, e_grad, e_ell = error_norms(uh, cfg.case, space)
    dm = space.dofmap
    r = dm.ranges()
    lines = [
        f"family: {cfg.family}",
        f"level: {level}",
        f"k: {cfg.k}",
        f"case: {cfg.case.name}",
        f"kappa: {cfg.case.kappa.a!r} {cfg.case.kappa.b!r} {cfg.case.kappa.c!r}",
        f"mu: {cfg.case.mu!r}",
        f"mesh: {mesh.summary()} h={mesh.h!r}",
        *_degree_lines(space),
        f"dofs_total: {dm.total}",
        f"dofs_interior: {r['interior'][1] - r['interior'][0]}",
        f"dofs_trace: {r['trace'][1] - r['trace'][0]}",
        f"dofs_flux: {r['flux'][1] - r['flux'][0]}",
        f"dofs_free: {system.free.size}",
        f"nnz: {system.A.nnz}",
        f"solver: {cfg.solver}{' condensed' if cfg.condense else ''}",
        f"e_l2: {e_l2!r}",
        f"e_grad: {e_grad!r}",
        f"e_ell: {e_ell!r}",
        f"energy_uh: {energy_norm(uh, space, cfg.case.problem)!r}",
        f"time_setup: {t1 - t0:.3f}",
        f"time_assemble: {t2 - t1:.3f}",
        f"time_solve: {t3 - t2:.3f}",
    ]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if cfg.out is not None:
        cfg.out.write_text(report)
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    table = run_convergence(
        cfg.case,
        cfg.family,
        cfg.k,
        cfg.levels,
        r1=cfg.r1,
        r2=cfg.r2,
        degrees=cfg.degrees,
        solver=cfg.solver,
        condense=cfg.condense,
        threads=cfg.threads,
    )
    csv = table.to_csv()
    sys.stdout.write(csv if cfg.format == "csv" else table.format() + "\n")
    if cfg.out is not None:
        cfg.out.write_text(csv)
    return EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "convergence": cmd_convergence}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfwg", description="Stabilizer-free weak Galerkin solver for (-div(kappa grad) + mu)^2 u = f.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    # every option defaults to None so config-file values can fill the gaps
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of 'key = value' lines; flags override it")
    common.add_argument("--family", help="mesh family: tri or pent")
    common.add_argument("--level", help="mesh level (n = 2^(level-1) cells per side)")
    common.add_argument("--out", help="output path")
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--levels", help="level range A:B (inclusive)")
    model.add_argument("--k", help="polynomial degree, 2..6")
    model.add_argument("--kappa", help="diffusion tensor entries 'a b c' for [[a, b], [b, c]]")
    model.add_argument("--mu", help="reaction coefficient")
    model.add_argument("--case", help="s1, s2 or custom")
    model.add_argument("--u", help="exact solution as 'a,b,coeff;...' meaning sum coeff x^a y^b")
    model.add_argument("--r1", help="degree of the weak elliptic lift")
    model.add_argument("--r2", help="degree of the weak gradient lift")
    model.add_argument("--degrees", help=f"default degree rule: {', '.join(DEGREE_RULES)}")
    model.add_argument("--solver", help="direct (sparse Cholesky) or cg")
    model.add_argument("--condense", action="store_const", const=True, help="eliminate interior DOFs first")
    model.add_argument("--threads", help="worker threads for element work")
    model.add_argument("--format", help="stdout format for convergence: table or csv")
    sub.add_parser("mesh", parents=[common], help="generate a mesh and print V/E/F counts")
    p_solve = sub.add_parser("solve", parents=[common, model], help="solve on one level and report errors")
    p_solve.add_argument("--dump-system", dest="dump_system", help="write A (Matrix Market) and <path>.rhs")
    sub.add_parser("convergence", parents=[common, model], help="convergence study over a level range")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigurationError as exc:
        print(f"sfwg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"sfwg: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MeshError as exc:
        print(f"sfwg: mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except WGError as exc:
        print(f"sfwg: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
