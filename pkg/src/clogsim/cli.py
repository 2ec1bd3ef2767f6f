"""Command-line front end: tables, cell solves, runs, and profile sweeps.

CSV files are the output contract: every file has a header row and
floats carry 17 significant digits, so identical configurations give
bit-identical outputs.  Plots are an optional convenience.

Exit codes: 0 success, 1 configuration problem, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cellmesh import build_mesh
from .cellsolver import solve_corrector, tortuosity, dump_corrector
from .coefftable import build_table, save as save_table
from .errors import (
    CellSolveError,
    ClogsimError,
    ConfigError,
    GeometryDomainError,
    MeshingError,
    SolverError,
    TableFormatError,
)
from .geometry import MicroConfig
from .macrosolver import resolve_table, run as run_simulation
from .observables import masses, porosity_field, storage_indicators
from .simconfig import RadiusProfile, load_config

_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return _FMT % float(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _out_root(flag_value, config_value) -> str:
    return os.environ.get("CLOGSIM_OUT") or flag_value or config_value


def _parse_profile(name: str, pairs: dict) -> RadiusProfile:
    known = {"value", "c", "mu", "sigma2"}
    bad = set(pairs) - known
    if bad:
        raise ConfigError(f"unknown profile parameter(s): {', '.join(sorted(bad))}")
    kwargs = {"name": name}
    if "value" in pairs:
        kwargs["value"] = float(pairs["value"])
    if "c" in pairs:
        kwargs["coeff"] = float(pairs["c"])
    if "mu" in pairs:
        kwargs["mu"] = float(pairs["mu"])
    if "sigma2" in pairs:
        kwargs["sigma2"] = float(pairs["sigma2"])
    return RadiusProfile(**kwargs)


def _profile_from_tokens(tokens) -> RadiusProfile:
    # run --profile r0=quad c=1.38
    pairs = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"profile tokens must be key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        pairs[key.strip()] = val.strip()
    if "r0" not in pairs:
        raise ConfigError("profile override needs r0=<name>")
    name = pairs.pop("r0")
    return _parse_profile(name, pairs)


def _profile_from_spec(spec: str) -> RadiusProfile:
    # sweep specs look like  quad:c=1.38  or  normal:mu=0.3,sigma2=0.8
    name, _, rest = spec.partition(":")
    pairs = {}
    if rest:
        for item in rest.split(","):
            if "=" not in item:
                raise ConfigError(f"bad profile spec item {item!r} in {spec!r}")
            key, val = item.split("=", 1)
            pairs[key.strip()] = val.strip()
    return _parse_profile(name.strip(), pairs)


# --- output writers ----------------------------------------------------------

def _write_run_outputs(result, config, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    snapshots = result.snapshots
    first = snapshots[0]
    n = first.n_species

    rows = []
    for snap in snapshots:
        u_mass, v_mass = masses(snap)
        sc_g = storage_indicators(snap, first).sc_global
        rows.append([snap.t, *u_mass, v_mass, sc_g])
    _write_csv(
        os.path.join(out_dir, "masses.csv"),
        ["t"] + [f"U{i + 1}" for i in range(n)] + ["V", "SC_g"],
        rows,
    )

    x = np.linspace(0.0, 1.0, config.M + 1)
    for snap in snapshots:
        phi = porosity_field(snap, config.micro_config)
        rows = [
            [x[j], *snap.a_u[:, j], snap.a_v[j], snap.a_r[j], phi[j]]
            for j in range(config.M + 1)
        ]
        _write_csv(
            os.path.join(out_dir, f"fields_{snap.t:.6f}.csv"),
            ["x"] + [f"u{i + 1}" for i in range(n)] + ["v", "r", "phi"],
            rows,
        )

    _write_csv(
        os.path.join(out_dir, "clogs.csv"),
        ["x", "t", "trigger"],
        [[ev.x, ev.time, ev.trigger.name.lower()] for ev in result.events],
    )


def _write_run_plots(result, config, out_dir) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    snapshots = result.snapshots
    ts = [s.t for s in snapshots]
    first = snapshots[0]
    n = first.n_species

    fig, ax = plt.subplots(figsize=(7, 4.5))
    curves = np.array([masses(s)[0] for s in snapshots])
    for i in range(n):
        ax.plot(ts, curves[:, i], label=f"U{i + 1}")
    ax.plot(ts, [masses(s)[1] for s in snapshots], "k--", label="V")
    ax.set_xlabel("t")
    ax.set_ylabel("mass")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "masses.svg"))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = np.linspace(0.0, 1.0, config.M + 1)
    ax.plot(x, snapshots[0].a_r, label=f"t={snapshots[0].t:g}")
    ax.plot(x, snapshots[-1].a_r, label=f"t={snapshots[-1].t:g}")
    ax.axhline(np.sqrt(2.0), color="k", lw=0.8, ls=":")
    ax.set_xlabel("x")
    ax.set_ylabel("r")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "radius.svg"))
    plt.close(fig)


# --- subcommands ---------------------------------------------------------------

def cmd_table(args) -> int:
    config = MicroConfig.parse(args.config)
    table = build_table(config, delta_r=args.dr, h=args.h, n_jobs=args.jobs)
    save_table(table, args.out)
    print(
        f"{table.n_nodes} nodes, tau in "
        f"[{table.tau.min():.6f}, {table.tau.max():.6f}] -> {args.out}"
    )
    return 0


def cmd_cell(args) -> int:
    config = MicroConfig.parse(args.config)
    mesh = build_mesh(args.radius, config, args.h)
    field = solve_corrector(mesh, direction=args.direction)
    coeff = tortuosity(field)
    dump_corrector(field, args.out)
    print(
        f"r={args.radius:g} config {config.value} ({mesh.kind} mesh, "
        f"{mesh.n_vertices} vertices): tau={coeff.tau_hat:.6f} "
        f"offdiag={coeff.tau_offdiag:.2e} -> {args.out}"
    )
    return 0


def _apply_run_overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.profile:
        changes["r_profile"] = _profile_from_tokens(args.profile)
    if args.table is not None:
        changes["table_path"] = args.table
    if changes:
        config = dataclasses.replace(config, **changes)
    return config


def cmd_run(args) -> int:
    config = _apply_run_overrides(load_config(args.config), args)
    out_dir = _out_root(args.out, config.out_dir)
    result = run_simulation(config)
    _write_run_outputs(result, config, out_dir)
    if args.plot:
        _write_run_plots(result, config, out_dir)
    print(
        f"{result.status.name}: t={result.snapshots[-1].t:g}, "
        f"{len(result.snapshots)} snapshots, {len(result.events)} clog events, "
        f"clipped mass {result.clipped_mass:.3e} -> {out_dir}"
    )
    return 0


def _sweep_member(payload):
    config, table, out_dir = payload
    result = run_simulation(config, table=table)
    _write_run_outputs(result, config, out_dir)
    first = min(result.events, key=lambda e: e.time) if result.events else None
    return {
        "n_clogs": len(result.events),
        "first_clog_x": "" if first is None else first.x,
        "first_clog_t": "" if first is None else first.time,
        "status": result.status.name.lower(),
    }


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    if args.table is not None:
        base = dataclasses.replace(base, table_path=args.table)
    if not args.profiles:
        raise ConfigError("sweep needs at least one profile spec")
    profiles = [_profile_from_spec(s) for s in args.profiles]
    root = _out_root(args.out, base.out_dir)
    os.makedirs(root, exist_ok=True)

    changes = {}
    if args.t_end is not None:
        changes["T"] = args.t_end
    base_seed = args.seed if args.seed is not None else 0

    table = resolve_table(base)
    jobs = []
    for idx, profile in enumerate(profiles):
        member = dataclasses.replace(
            base, r_profile=profile, seed=base_seed + idx, **changes
        )
        out_dir = os.path.join(root, f"prof_{idx:02d}_{profile.name}")
        jobs.append((member, table, out_dir))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(job) for job in jobs]

    rows = []
    for (member, _, out_dir), info in zip(jobs, results):
        rows.append([
            member.r_profile.name,
            member.seed,
            os.path.relpath(out_dir, root),
            info["status"],
            info["n_clogs"],
            info["first_clog_x"],
            info["first_clog_t"],
        ])
    _write_csv(
        os.path.join(root, "sweep_summary.csv"),
        ["profile", "seed", "dir", "status", "n_clogs", "first_clog_x", "first_clog_t"],
        rows,
    )
    print(f"{len(profiles)} runs -> {root}")
    return 0


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clogsim",
        description="Two-scale colloid transport, deposition and clogging simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="build and save a coefficient table")
    p.add_argument("--config", default="A", help="micro configuration, A or B")
    p.add_argument("--dr", type=float, default=0.02, help="radius grid spacing")
    p.add_argument("--h", type=float, default=0.05, help="cell mesh size")
    p.add_argument("--jobs", type=int, default=None, help="parallel cell solves")
    p.add_argument("--out", required=True, help="output table path")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("cell", help="solve one cell problem and dump the corrector")
    p.add_argument("--config", default="A", help="micro configuration, A or B")
    p.add_argument("--radius", type=float, required=True, help="grain radius")
    p.add_argument("--h", type=float, default=0.05, help="cell mesh size")
    p.add_argument("--direction", type=int, default=1, choices=(1, 2))
    p.add_argument("--out", required=True, help="output dump path")
    p.set_defaults(func=cmd_cell)

    p = sub.add_parser("run", help="run one simulation from a config file")
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="profile seed override")
    p.add_argument("--table", default=None, help="coefficient table path override")
    p.add_argument(
        "--profile", nargs="+", default=None, metavar="KEY=VALUE",
        help="initial-radius profile override, e.g. r0=quad c=1.38",
    )
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a batch of initial-radius profiles")
    p.add_argument("--config", required=True, help="base configuration file")
    p.add_argument(
        "--profiles", nargs="*", default=[], metavar="SPEC",
        help="profile specs like quad:c=1.38 or normal:mu=0.3,sigma2=0.8",
    )
    p.add_argument("--out", default=None, help="output root directory")
    p.add_argument("--table", default=None, help="coefficient table path override")
    p.add_argument("--seed", type=int, default=None, help="base seed (member i gets seed+i)")
    p.add_argument("--t-end", type=float, default=None, help="override end time")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TableFormatError, GeometryDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, CellSolveError, MeshingError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except ClogsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
