"""Command-line entry point: batch runs, parking studies, calibration
and the real-time telemetry session.

Every mode writes its artifacts into the output directory together
with a fully resolved configuration echo, so a run can be reproduced
from its outputs alone. Errors from any subsystem exit nonzero with a
single structured line on stderr.
"""

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .calibration import ParkingSetup, cycle_metrics, fit_turn_rate, \
    parking_equilibrium, turn_rate_samples
from .config import RUN_MODES, SimConfig, build_pilot, build_plant, \
    load_config, resolved_yaml
from .errors import InsufficientDataError, KiteSimError
from .server import TelemetryServer
from .simulator import Simulator, equilibrium_state

#: Settle and averaging window of the parking study (s).
PARKING_SETTLE = 60.0
PARKING_WINDOW = 60.0

_PARKING_HEADER = ("kite_model,tether,n_segments,force_n,force_std_n,"
                   "elevation_deg,elevation_std_deg,azimuth_deg,settled")


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.6g}"


def initial_state(config: SimConfig, plant) -> np.ndarray:
    """Starting state per the scenario block.

    Uses the static force balance when requested and available; falls
    back to the straight-line layout if the balance cannot be found
    (for example at zero wind).
    """
    s = config.scenario
    if s.equilibrium_start:
        try:
            return equilibrium_state(plant, s.elevation_deg, s.azimuth_deg,
                                     s.l_t,
                                     pitch_back_deg=config.pitch_back_deg)
        except KiteSimError:
            pass
    return plant.initial_state(s.elevation_deg, s.azimuth_deg, s.l_t,
                               pitch_back_deg=config.pitch_back_deg)


def _write_resolved(config: SimConfig, out: Path):
    (out / "resolved.yaml").write_text(resolved_yaml(config),
                                       encoding="utf-8")


def run_batch(config: SimConfig, out: Path) -> int:
    """Unpaced closed-loop run: flight log CSV plus cycle metrics."""
    plant = build_plant(config)
    pilot = build_pilot(config)
    sim = Simulator(plant, pilot, config.solver)
    y = initial_state(config, plant)
    log, _ = sim.run_batch(y, config.scenario.duration)
    log.to_csv(out / "log.csv")
    try:
        report = cycle_metrics(log).report()
    except InsufficientDataError as exc:
        report = f"no_complete_cycle=true\ndetail={exc.message}"
    (out / "metrics.txt").write_text(report + "\n", encoding="utf-8")
    _write_resolved(config, out)
    return 0

def run_parking(config: SimConfig, out: Path) -> int:
    """Parking comparison across the four model variants.

    Rows cover the one-point and four-point kites on a straight
    (single-segment) and a segmented tether, using the configured
    segment count for the segmented rows.
    """
    a = config.atmosphere
    rows = []
    n_seg = max(config.tether.n_segments, 2)
    for model in ("1p", "4p"):
        for n in (1, n_seg):
            setup = ParkingSetup(
                model=model,
                kite=config.kite.params,
                tether=dataclasses.replace(config.tether, n_segments=n),
                winch=config.winch,
                z_ref=a.z_ref, z0=a.z0, k_profile=a.k, law=a.law,
                turbulence_intensity=a.turbulence_intensity,
                seed=config.scenario.seed,
                pitch_back_deg=-7.5 if model == "4p" else 0.0)
            report = parking_equilibrium(
                setup, a.v_w_ref, config.scenario.l_t,
                config.controller.depower.parking,
                settle=PARKING_SETTLE, window=PARKING_WINDOW,
                elevation0_deg=config.scenario.elevation_deg)
            c = report.case
            rows.append(",".join([
                model, "straight" if n == 1 else "segmented", str(n),
                _fmt(c.force), _fmt(c.force_std), _fmt(c.elevation_deg),
                _fmt(c.elevation_std_deg), _fmt(report.azimuth_deg),
                "true" if report.settled else "false"]))
    text = "\n".join([_PARKING_HEADER] + rows) + "\n"
    (out / "parking.csv").write_text(text, encoding="utf-8")
    _write_resolved(config, out)
    return 0


def run_calibrate(config: SimConfig, out: Path) -> int:
    """Steering-response calibration from a simulated reel-out flight.

    Runs the configured plant through figure-eight reel-out, extracts
    smoothed turn-rate samples and writes the fitted law with its
    correlation as a key=value report.
    """
    scenario = dataclasses.replace(config.scenario, phase="reel_out_right",
                                   equilibrium_start=True)
    config = dataclasses.replace(config, scenario=scenario)
    plant = build_plant(config)
    pilot = build_pilot(config)
    sim = Simulator(plant, pilot, config.solver)
    y = initial_state(config, plant)
    log, _ = sim.run_batch(y, config.scenario.duration)
    log.to_csv(out / "calibration_log.csv")
    fit = fit_turn_rate(turn_rate_samples(log))
    (out / "turn_rate.txt").write_text(fit.report() + "\n",
                                      encoding="utf-8")
    _write_resolved(config, out)
    return 0


def run_realtime(config: SimConfig, out: Path) -> int:
    """Wall-clock paced session serving telemetry until the duration
    elapses; runs under automatic control when no client connects."""
    plant = build_plant(config)
    pilot = build_pilot(config)
    sim = Simulator(plant, pilot, config.solver)
    y = initial_state(config, plant)
    server = TelemetryServer(config.scenario.port)
    print(f"telemetry on port {server.port}", flush=True)
    try:
        log, _, pacing = sim.run_realtime(
            y, config.scenario.duration,
            command_source=server.poll_override, sink=server.publish)
    finally:
        drops = server.total_drops
        server.close()
    log.to_csv(out / "log.csv")
    report = (f"intervals={pacing.intervals}\n"
              f"deadline_misses={pacing.deadline_misses}\n"
              f"degraded={'true' if pacing.degraded else 'false'}\n"
              f"dropped_frames={drops}\n")
    (out / "realtime.txt").write_text(report, encoding="utf-8")
    _write_resolved(config, out)
    return 0


_RUNNERS = {"batch": run_batch, "parking": run_parking,
            "calibrate": run_calibrate, "realtime": run_realtime}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kitesim",
        description="Pumping kite power system simulator")
    parser.add_argument("mode", choices=RUN_MODES)
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="override scenario seed")
    parser.add_argument("--duration", type=float,
                        help="override run duration (s)")
    parser.add_argument("--port", type=int,
                        help="override telemetry port")
    parser.add_argument("--out", default=".",
                        help="output directory (created if missing)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else SimConfig()
        overrides = {"mode": args.mode}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.duration is not None:
            overrides["duration"] = args.duration
        if args.port is not None:
            overrides["port"] = args.port
        scenario = dataclasses.replace(config.scenario, **overrides)
        config = dataclasses.replace(config, scenario=scenario)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _RUNNERS[args.mode](config, out)
    except KiteSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
