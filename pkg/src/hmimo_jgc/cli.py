"""Command-line front end for the simulation harness.

Subcommands:
  run           full campaign as configured (algorithms x SNRs x pilots x trials)
  sweep-snr     one pilot length, many SNRs
  sweep-pilots  one SNR, many pilot lengths
  convergence   single cell with per-iteration traces (convergence study)
  validate      quick invariant suite on a tiny instance

Flags override config-file values; --print-config echoes the resolved
config and exits. Exit codes: 0 success, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import harness
from .harness import CampaignConfig, ConfigError, load_config


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmimo-jgc",
        description="Monte-Carlo harness for wavenumber-domain multi-user channel estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("run", "run the campaign exactly as configured"),
        ("sweep-snr", "sweep SNR at a single pilot length"),
        ("sweep-pilots", "sweep pilot length at a single SNR"),
        ("convergence", "trace per-iteration error at a single cell"),
        ("validate", "run the built-in invariant suite on a tiny instance"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="JSON campaign config file")
        p.add_argument("--snr", nargs="+", type=float, help="SNR values in dB")
        p.add_argument("--pilots", nargs="+", type=int, help="pilot lengths T")
        p.add_argument("--trials", type=int, help="Monte-Carlo trials")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--threads", type=int, help="parallel trial workers")
        p.add_argument("--algorithms", nargs="+", help="algorithms to run")
        p.add_argument("--timing", action="store_true",
                       help="record real wall times (breaks byte-for-byte determinism)")
        p.add_argument("--print-config", action="store_true",
                       help="echo the fully resolved config and exit")
    return parser


def _resolve_config(args) -> CampaignConfig:
    cfg = load_config(args.config) if args.config else CampaignConfig()
    overrides = {}
    if args.snr is not None:
        overrides["snr_db"] = tuple(args.snr)
    if args.pilots is not None:
        overrides["pilot_lengths"] = tuple(args.pilots)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.algorithms is not None:
        overrides["algorithms"] = tuple(args.algorithms)
    if args.timing:
        overrides["record_timing"] = True
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    if args.command == "sweep-snr":
        if len(cfg.snr_db) < 2:
            raise ConfigError("sweep-snr: give at least two SNR values (--snr)")
        cfg = dataclasses.replace(cfg, pilot_lengths=cfg.pilot_lengths[:1])
    elif args.command == "sweep-pilots":
        if len(cfg.pilot_lengths) < 2:
            raise ConfigError("sweep-pilots: give at least two pilot lengths (--pilots)")
        cfg = dataclasses.replace(cfg, snr_db=cfg.snr_db[:1])
    elif args.command == "convergence":
        cfg = dataclasses.replace(
            cfg, snr_db=cfg.snr_db[:1], pilot_lengths=cfg.pilot_lengths[:1])
    return cfg.validate()


def _validate_suite() -> bool:
    """Small self-checks exercising each layer; prints one line per check."""
    from .estimators import EstimatorConfig, generate_measurements, nmse, trim_ls
    from .lattice import ArrayGeometry, build_basis, build_lattice
    from .mincut import SupportGraph, energy, minimize

    ok = True

    def check(name, passed):
        nonlocal ok
        ok = ok and passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")

    geometry = ArrayGeometry(n_x=9, n_y=9, delta=0.25, lam=1.0)  # 2-wavelength aperture
    lattice = build_lattice(geometry)
    check("lattice: 2-wavelength aperture has 13 cells", len(lattice) == 13)
    check("lattice: neighbor symmetry",
          all(p in lattice.neighbors[q] for p, nbs in enumerate(lattice.neighbors) for q in nbs))

    basis = build_basis(geometry, lattice)
    norms = np.linalg.norm(basis.psi, axis=0)
    check("basis: unit column norms", bool(np.all(np.abs(norms - 1) < 1e-12)))

    rng = np.random.default_rng(7)
    unary = rng.uniform(-2, 2, size=(len(lattice), 2))
    graph = SupportGraph(lattice=lattice, unary=unary, pairwise_beta=0.45)
    best = minimize(graph)
    brute = min(energy(graph, lbl) for lbl in _all_labelings(len(lattice)))
    check("mincut: matches exhaustive minimum", abs(best.energy - brute) < 1e-9)

    true_h = np.zeros(len(lattice), dtype=complex)
    true_h[[2, 5, 9]] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    pilots_rng = np.random.default_rng(11)
    labels = np.where(np.abs(true_h) > 0, 1, -1)
    from .channel import UserChannel
    meas = generate_measurements([UserChannel(h_f=true_h, support=np.flatnonzero(true_h))],
                                 basis, 8, float("inf"), pilots_rng)
    h_hat, _ = trim_ls(meas.received[0], meas.effective, labels, None)
    check("trim-ls: exact recovery on the true support",
          nmse(true_h, h_hat) < 1e-20)

    cfg = harness.CampaignConfig(trials=1, snr_db=(15.0,), pilot_lengths=(12,),
                                 users=3, algorithms=("jgc_ce",),
                                 geometry=harness.GeometryConfig(n_x=9, n_y=9),
                                 estimator=EstimatorConfig(k0=2))
    rows_a = harness.run_campaign(cfg, write_csv=False)
    rows_b = harness.run_campaign(cfg, write_csv=False)
    check("harness: repeated runs produce identical rows", rows_a == rows_b)
    return ok


def _all_labelings(n):
    for bits in range(1 << n):
        yield np.array([1 if (bits >> i) & 1 else -1 for i in range(n)])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return 0 if _validate_suite() else 1
        cfg = _resolve_config(args)
        if args.print_config:
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            return 0
        rows = harness.run_campaign(cfg)
        harness.print_summary(harness.summarize(rows, cfg.estimator.residual_tol),
                              stream=sys.stdout)
        print(f"wrote {len(rows)} rows to {cfg.output_path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
