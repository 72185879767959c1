"""Command line entry point: ``twotone {run,sweep,wigner,snr} --config PATH``.

Exit codes: 0 success, 2 configuration error, 3 numerical invariant breach or
failed cutoff convergence gate.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness.config import (
    SWEEP_SCENARIOS,
    ConfigError,
    RunConfig,
    manifest_hash,
    parse_config,
    render_manifest,
    validate,
)
from .harness.export import emit_plot_data
from .harness.scenarios import (
    ConvergenceError,
    dispersive_taus,
    kind_params,
    run_scenario,
    sweep_delta_h,
)
from .measurement import snr
from .models import measured_basis, readout_frame
from .observables import TruncationError, default_extent, reduce, wigner
from .quantum import DensityMatrix, HilbertSpace, fock_ket, qubit_ket
from .solver import IntegratorError, InvariantBreach, evolve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twotone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("run", "execute the configured scenario"),
        ("sweep", "sweep delta_h with the configured kinds and quantities"),
        ("wigner", "Wigner grids of the cavity state at the final time"),
        ("snr", "homodyne signal, noise and SNR tables for every configured kind"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="key = value config file")
        p.add_argument("--output-dir", type=Path, help="directory for output files")
        p.add_argument("--cutoff", type=int, help="Fock cutoff N (overrides fock_cutoff)")
        p.add_argument("--dt-max", type=float, help="largest integration step")
        p.add_argument("--format", choices=("csv", "gnuplot"), help="plot data format")
    return parser


def _load(args) -> RunConfig:
    cfg = parse_config(args.config)
    changes = {}
    if args.cutoff is not None:
        changes["fock_cutoff"] = args.cutoff
    if args.dt_max is not None:
        try:
            changes["integrator"] = replace(cfg.integrator, dt_max=args.dt_max)
        except ValueError as exc:
            raise ConfigError(str(exc), key="--dt-max") from None
    if args.format is not None:
        changes["format"] = args.format
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    cfg = replace(cfg, **changes)
    validate(cfg)
    return cfg


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(render_manifest(cfg), encoding="utf-8")
    return out


def _cmd_sweep(cfg: RunConfig) -> list[Path]:
    if cfg.scenario not in SWEEP_SCENARIOS:
        raise ConfigError(f"scenario {cfg.scenario!r} is not a sweep", key="scenario")
    out = _prepare_out(cfg)
    result = sweep_delta_h(cfg)
    header = [f"manifest_sha256 = {manifest_hash(cfg)}", f"scenario = {cfg.scenario}"]
    return emit_plot_data(result, out / "sweep", cfg.format, header)


def _cmd_wigner(cfg: RunConfig) -> list[Path]:
    out = _prepare_out(cfg)
    space = HilbertSpace(cfg.fock_cutoff)
    kind = cfg.kinds[0]
    p = kind_params(kind, cfg.params)
    labels = measured_basis(kind)
    rhos = [DensityMatrix.product(qubit_ket(s), fock_ket(0, space.fock_cutoff), space)
            for s in labels]
    traj = evolve(kind, p, rhos, cfg.final_time, cfg.integrator, max_stored=1)
    theta = (readout_frame(kind, p).cavity - traj.frame.cavity) * traj.times[-1]
    extent = cfg.wigner_extent or default_extent(p.j_r, p.kappa)
    files = []
    for j, s in enumerate(labels):
        rho_c = reduce(DensityMatrix(traj.states[-1][j], space, check=False), "cavity").matrix
        n = np.arange(space.fock_cutoff)
        rho_c = rho_c * np.exp(1j * theta * (n[:, None] - n[None, :]))
        grid = wigner(rho_c, (-extent, extent), (-extent, extent), cfg.wigner_points,
                      cfg.wigner_points)
        files.append(grid.save(out / f"wigner_{kind.value}_{s}.dat"))
    return files


def _cmd_snr(cfg: RunConfig) -> list[Path]:
    out = _prepare_out(cfg)
    space = HilbertSpace(cfg.fock_cutoff)
    taus = dispersive_taus(cfg)
    header = [f"manifest_sha256 = {manifest_hash(cfg)}", f"scenario = {cfg.scenario}"]
    files = []
    for kind in cfg.kinds:
        res = snr(kind_params(kind, cfg.params), kind, taus, cfg.integrator, space,
                  noise=cfg.noise, outer_points=cfg.outer_points)
        files.append(res.to_csv(out / f"snr_{kind.value}.csv",
                                header + [f"kind = {kind.value}",
                                          f"preparations = {', '.join(res.preparations)}"]))
    return files


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run":
            report = run_scenario(cfg)
            files = report.files
            if report.breaches:
                for b in report.breaches:
                    print(f"invariant breach: {b}", file=sys.stderr)
                return EXIT_NUMERIC
        else:
            files = {"sweep": _cmd_sweep, "wigner": _cmd_wigner, "snr": _cmd_snr}[args.command](cfg)
    except (ConfigError, IntegratorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantBreach, ConvergenceError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
