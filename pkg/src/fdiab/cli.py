"""Command-line runner: scenario ingestion, experiment orchestration, CSV output.

Commands
    link-sim           per-node SI reduction chain -> reduction.csv
    system-sim         throughput drop over all modes -> throughput.csv, cdf.csv
    sweep              link chains over a parameter grid -> sweep.csv
    compare-prototype  simulated vs measured suppression -> compare_prototype.csv

Every run writes a run.json sidecar with the fully resolved configuration,
seed and tool version; outputs are byte-identical for identical
(scenario, seed, version), timestamp aside. FDIAB_THREADS caps sweep
parallelism. Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""

import argparse
import csv
import datetime
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .geometry import SiGeometry
from .prototype import compare_prototype
from .rf import NoiseModel
from .scenario import (
    ScenarioError,
    apply_overrides,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .sic import LinkChainParams, run_link_chain
from .system import ALL_MODES, Mode, SECTOR_CENTER_EL_DEG, cdf, direction_from_angles, run_drop
from .util import substream

REDUCTION_COLUMNS = (
    "node",
    "antenna_separation_m",
    "seed",
    "tx_power_dbm",
    "after_propagation_dbm",
    "after_analog_dbm",
    "after_digital_dbm",
    "propagation_db",
    "analog_db",
    "digital_db",
    "noise_floor_dbm",
    "analog_applied",
    "gray_zone_ok",
    "digital_saturated",
    "holdout_residual_dbm",
)

THROUGHPUT_COLUMNS = (
    "mode",
    "ue_id",
    "serving_cell",
    "beam",
    "access_snr_db",
    "access_sinr_db",
    "backhaul_sinr_db",
    "dli_power_dbm",
    "throughput_bps",
)

CDF_COLUMNS = ("mode", "throughput_bps", "cdf")

COMPARE_COLUMNS = (
    "separation_m",
    "relative_azimuth_deg",
    "measured_suppression_db",
    "simulated_suppression_db",
    "reconstructed",
)

COMPARE_SUMMARY_COLUMNS = (
    "separation_m",
    "measured_mean_db",
    "simulated_mean_db",
    "delta_db",
)


@dataclass(frozen=True)
class RunConfig:
    command: str
    scenario_path: str | None
    seed: int | None
    output_dir: str
    overrides: tuple


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _write_sidecar(out_dir, cfg, resolved_scenario, outputs):
    sidecar = {
        "tool": "fdiab",
        "version": __version__,
        "command": cfg.command,
        "scenario_path": cfg.scenario_path,
        "seed": cfg.seed,
        "overrides": list(cfg.overrides),
        "resolved_scenario": resolved_scenario,
        "outputs": outputs,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_with_overrides(cfg):
    with open(cfg.scenario_path) as fh:
        data = json.load(fh)
    data = apply_overrides(data, cfg.overrides)
    return scenario_from_dict(data), data


def chain_params_for_node(scenario, node):
    """Link-chain inputs for one IAB node: the DU looks into its access
    sector at the codebook's center elevation, the MT looks at the donor."""
    az = scenario.sector_center_az(node)
    du_dir = direction_from_angles(az, SECTOR_CENTER_EL_DEG)
    mt_to_donor = np.asarray(scenario.donor.position, float) - np.asarray(
        node.mt_position(), float
    )
    mt_dir = mt_to_donor / np.linalg.norm(mt_to_donor)
    geometry = SiGeometry(
        antenna_separation_m=node.antenna_separation_m,
        tx_orientation=tuple(float(c) for c in du_dir),
        rx_orientation=tuple(float(c) for c in mt_dir),
    )
    return LinkChainParams(
        geometry=geometry,
        tx_pattern=node.pattern,
        rx_pattern=node.pattern,
        reflectors=scenario.reflectors,
        noise=NoiseModel(scenario.bandwidth_hz, scenario.noise_figure_db),
        carrier_freq_hz=scenario.carrier_freq_hz,
    )


def _reduction_row(node_idx, node, seed, report):
    prop, analog, digital = report.per_domain_db
    return {
        "node": node_idx,
        "antenna_separation_m": node.antenna_separation_m,
        "seed": seed,
        "tx_power_dbm": report.tx_power_dbm,
        "after_propagation_dbm": report.after_propagation_dbm,
        "after_analog_dbm": report.after_analog_dbm,
        "after_digital_dbm": report.after_digital_dbm,
        "propagation_db": prop,
        "analog_db": analog,
        "digital_db": digital,
        "noise_floor_dbm": report.noise_floor_dbm,
        "analog_applied": report.analog_applied,
        "gray_zone_ok": report.gray_zone_ok,
        "digital_saturated": report.digital_saturated,
        "holdout_residual_dbm": report.holdout_residual_dbm,
    }


def cmd_link_sim(cfg):
    scenario, data = _load_with_overrides(cfg)
    rows = []
    for ni, node in enumerate(scenario.iab_nodes):
        params = chain_params_for_node(scenario, node)
        node_seed = int(substream(cfg.seed, "link", ni).integers(2**63))
        report = run_link_chain(params, node_seed)
        rows.append(_reduction_row(ni, node, node_seed, report))
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "reduction.csv")
    _write_csv(out, REDUCTION_COLUMNS, rows)
    _write_sidecar(cfg.output_dir, cfg, data, ["reduction.csv"])
    return 0


def cmd_system_sim(cfg, modes=ALL_MODES):
    scenario, data = _load_with_overrides(cfg)
    records = run_drop(scenario, cfg.seed, modes=modes)
    rows = [
        {
            "mode": r.mode,
            "ue_id": r.ue_id,
            "serving_cell": r.serving_cell,
            "beam": r.beam,
            "access_snr_db": r.access_snr_db,
            "access_sinr_db": r.access_sinr_db,
            "backhaul_sinr_db": r.backhaul_sinr_db,
            "dli_power_dbm": r.dli_power_dbm,
            "throughput_bps": r.throughput_bps,
        }
        for r in records
    ]
    cdf_rows = []
    for mode in modes:
        mode = Mode(mode)
        values = [r.throughput_bps for r in records if r.mode == mode.value]
        v, p = cdf(values)
        cdf_rows.extend(
            {"mode": mode.value, "throughput_bps": float(tv), "cdf": float(tp)}
            for tv, tp in zip(v, p)
        )
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.output_dir, "throughput.csv"), THROUGHPUT_COLUMNS, rows)
    _write_csv(os.path.join(cfg.output_dir, "cdf.csv"), CDF_COLUMNS, cdf_rows)
    _write_sidecar(cfg.output_dir, cfg, data, ["throughput.csv", "cdf.csv"])
    return 0


def _parse_grid(specs):
    grid = []
    for spec in specs:
        if "=" not in spec:
            raise ScenarioError(f"grid {spec!r}: expected key=v1,v2,...")
        key, raw = spec.split("=", 1)
        values = []
        for part in raw.split(","):
            try:
                values.append(json.loads(part))
            except json.JSONDecodeError:
                values.append(part)
        if not values:
            raise ScenarioError(f"grid {spec!r}: no values")
        grid.append((key, values))
    return grid


def _sweep_cell(payload):
    """One sweep cell: apply grid assignments, run every node over all drops."""
    cell_idx, base_data, assignment, seed, drops = payload
    data = json.loads(json.dumps(base_data))
    overrides = [f"{k}={json.dumps(v)}" for k, v in assignment]
    data = apply_overrides(data, overrides)
    scenario = scenario_from_dict(data)
    rows = []
    for drop in range(drops):
        for ni, node in enumerate(scenario.iab_nodes):
            params = chain_params_for_node(scenario, node)
            node_seed = int(substream(seed, "sweep", cell_idx, drop, ni).integers(2**63))
            report = run_link_chain(params, node_seed)
            row = {"cell": cell_idx, "drop": drop}
            row.update({k: v for k, v in assignment})
            row.update(_reduction_row(ni, node, node_seed, report))
            rows.append(row)
    return cell_idx, rows


def cmd_sweep(cfg, grid_specs, drops):
    with open(cfg.scenario_path) as fh:
        base = json.load(fh)
    base = apply_overrides(base, cfg.overrides)
    scenario_from_dict(base)  # validate before fanning out
    grid = _parse_grid(grid_specs)
    keys = [k for k, _ in grid]
    cells = list(itertools.product(*[[(k, v) for v in vals] for k, vals in grid]))
    payloads = [
        (ci, base, assignment, cfg.seed, drops) for ci, assignment in enumerate(cells)
    ]

    threads = int(os.environ.get("FDIAB_THREADS", "1") or "1")
    if threads > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]
    results.sort(key=lambda item: item[0])

    columns = ("cell", "drop", *keys, *REDUCTION_COLUMNS)
    rows = [row for _, cell_rows in results for row in cell_rows]
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.output_dir, "sweep.csv"), columns, rows)
    _write_sidecar(cfg.output_dir, cfg, base, ["sweep.csv"])
    return 0


def cmd_compare_prototype(cfg):
    rows, summary = compare_prototype(seed=cfg.seed if cfg.seed is not None else 0)
    summary_rows = [
        {
            "separation_m": sep,
            "measured_mean_db": s["measured_mean_db"],
            "simulated_mean_db": s["simulated_mean_db"],
            "delta_db": s["delta_db"],
        }
        for sep, s in sorted(summary.items())
    ]
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.output_dir, "compare_prototype.csv"), COMPARE_COLUMNS, rows)
    _write_csv(
        os.path.join(cfg.output_dir, "compare_summary.csv"),
        COMPARE_SUMMARY_COLUMNS,
        summary_rows,
    )
    _write_sidecar(cfg.output_dir, cfg, None, ["compare_prototype.csv", "compare_summary.csv"])
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fdiab",
        description="Full-duplex IAB simulator: SI reduction chains and throughput drops.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=True, scenario_required=True):
        if scenario_required:
            p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument(
            "--seed", type=int, required=seed_required, help="64-bit experiment seed"
        )
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a scenario field (dotted path, '*' for list wildcards)",
        )

    common(sub.add_parser("link-sim", help="run the SI reduction chain per IAB node"))

    p_sys = sub.add_parser("system-sim", help="run one throughput drop over all modes")
    common(p_sys)
    p_sys.add_argument(
        "--modes",
        default=",".join(m.value for m in ALL_MODES),
        help="comma-separated subset of modes",
    )

    p_sweep = sub.add_parser("sweep", help="sweep link chains over a parameter grid")
    common(p_sweep)
    p_sweep.add_argument(
        "--grid",
        action="append",
        default=[],
        metavar="KEY=V1,V2,...",
        help="sweep axis over scenario fields (repeatable; cartesian product)",
    )
    p_sweep.add_argument("--drops", type=int, default=1, help="seeded drops per cell")

    p_cmp = sub.add_parser(
        "compare-prototype", help="simulated vs measured propagation suppression"
    )
    common(p_cmp, seed_required=False, scenario_required=False)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        scenario_path=getattr(args, "scenario", None),
        seed=args.seed,
        output_dir=args.out,
        overrides=tuple(args.overrides),
    )
    try:
        if args.command == "link-sim":
            return cmd_link_sim(cfg)
        if args.command == "system-sim":
            modes = tuple(Mode(m.strip()) for m in args.modes.split(",") if m.strip())
            return cmd_system_sim(cfg, modes=modes)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.grid, args.drops)
        if args.command == "compare-prototype":
            return cmd_compare_prototype(cfg)
        raise ValueError(f"unknown command {args.command}")
    except (ScenarioError, ValueError) as exc:
        print(f"fdiab: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fdiab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
