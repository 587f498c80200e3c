"""Command-line entry point.

Exit codes: 0 ran (including non-converged VQE runs), 1 config or parse
error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import AimVqeError, ConfigError, OperatorSyntaxError
from .experiments import (
    BUNDLED_PREFIX,
    CORRELATION_COLUMNS,
    SWEEP_COLUMNS,
    ExperimentConfig,
    bundled_config_path,
    exact_summary,
    load_config,
    load_hamiltonian,
    result_envelope,
    run_correlation,
    run_jmodel,
    run_sweep,
    run_vqe_experiment,
    write_csv,
    write_json,
)
from .pauli import load_operator

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
HERMITIAN_TOL = 1e-12


def _config(args) -> tuple[ExperimentConfig, Path]:
    if args.config is None:
        raise ConfigError("config", "--config is required for this command")
    path = args.config
    if path.startswith(BUNDLED_PREFIX):
        path = bundled_config_path(path[len(BUNDLED_PREFIX):])
    cfg, base = load_config(path)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg, base


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("out") / (cfg.id if cfg is not None else "exact")


def _hamiltonian(args):
    if args.path:
        return load_operator(args.path), Path(args.path).stem
    cfg, base = _config(args)
    return load_hamiltonian(cfg.hamiltonian, base), cfg.id


def cmd_parse(args) -> int:
    h, _ = _hamiltonian(args)
    max_imag = max((abs(c.imag) for c, _ in h.terms), default=0.0)
    kind = "hermitian" if max_imag <= HERMITIAN_TOL else "non-hermitian"
    print(f"{len(h)} terms, {h.num_qubits} qubits, {kind}")
    print(f"max |imag coefficient| = {max_imag:.3e}")
    return EXIT_OK


def cmd_exact(args) -> int:
    h, name = _hamiltonian(args)
    rec = exact_summary(h, name)
    print(f"E0 = {rec['energy_repr']} Eh")
    print(f"gap = {rec['gap']:.12g} Eh")
    print(f"sector <N> = {rec['sector']:.12g}")
    out = _out_dir(args) / "golden.json"
    write_json(out, {name: rec})
    print(f"wrote {out}")
    return EXIT_OK


def cmd_vqe(args) -> int:
    cfg, base = _config(args)
    out = _out_dir(args, cfg)
    result = run_vqe_experiment(cfg, base, out)
    fin, gold = result["final"], result["golden"]
    print(
        f"{cfg.id}: E = {fin['energy']:.10f} Eh, exact {gold['exact_energy']:.10f}, "
        f"rel. error {gold['relative_error']:.3e}, converged={fin['converged']} ({fin['reason']})"
    )
    print(f"wrote {out / 'trace.csv'} and {out / 'result.json'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, base = _config(args)
    out = _out_dir(args, cfg)
    rows, summary = run_sweep(cfg, base, threads=args.threads)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    write_json(out / "sweep.json", result_envelope(cfg, "sweep", csv_file="sweep.csv", summary=summary))
    for label, m in summary["means"].items():
        print(f"{cfg.sweep.variable}={label}: mean |dE| = {m['energy_dev_abs']:.6e} Eh, corr dev {m['corr_dev_pct']:.3f}%")
    fit = summary.get("slope_fit")
    if fit:
        print(f"log-log slope {fit['slope']:.4f} (r2 {fit['r2']:.4f}, {fit['n_points']} points)")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_correlation(args) -> int:
    cfg, base = _config(args)
    out = _out_dir(args, cfg)
    rows = run_correlation(cfg, base)
    write_csv(out / "correlation.csv", CORRELATION_COLUMNS, rows)
    write_json(out / "correlation.json", result_envelope(cfg, "correlation", csv_file="correlation.csv", rows=rows))
    for r in rows:
        print(f"{r['topology'] or '-':10s} {r['ansatz']:20s} {r['szsz']: .6f}")
    return EXIT_OK


def cmd_jmodel(args) -> int:
    cfg, _ = _config(args) if args.config else (ExperimentConfig(), Path("."))
    if args.seed is not None and not args.config:
        cfg = cfg.model_copy(update={"seed": args.seed})
    out = _out_dir(args, cfg)
    summary = run_jmodel(cfg, threads=args.threads)
    samples = summary.pop("samples")
    write_csv(
        out / "jmodel.csv",
        ("index", "delta_perturbation", "j_exact", "j_first_order"),
        [dict(s, index=i) for i, s in enumerate(samples)],
    )
    write_json(out / "jmodel.json", result_envelope(cfg, "jmodel", csv_file="jmodel.csv", summary=summary))
    print(f"J = {summary['j']:.10e} Eh; Monte Carlo mean {summary['mean']:.10e} +- {summary['std']:.3e}")
    return EXIT_OK


COMMANDS = {
    "parse": cmd_parse,
    "exact": cmd_exact,
    "vqe": cmd_vqe,
    "sweep": cmd_sweep,
    "correlation": cmd_correlation,
    "jmodel": cmd_jmodel,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aimvqe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name in ("parse", "exact"):
            p.add_argument("path", nargs="?", help="Hamiltonian listing (or use --config)")
        p.add_argument("--config", help="JSON config file, or bundled:<name>")
        p.add_argument("--out-dir", help="output directory (default out/<experiment id>)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except OperatorSyntaxError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except AimVqeError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
