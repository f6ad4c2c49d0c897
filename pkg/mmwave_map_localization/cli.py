#!/usr/bin/env python3
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

import numpy as np
import pandas as pd

from mmwave_map_localization.common import setup_logging
from mmwave_map_localization.config_def import ScenarioConfig, TraceConfig, TraceMethod
from mmwave_map_localization.geometry.indoor_map import load_map_file
from mmwave_map_localization.localization.candidates import PathObservation
from mmwave_map_localization.localization.map_at import locate
from mmwave_map_localization.raytracer.tracer import trace
from mmwave_map_localization.simharness.scenario import load_scenario, run_scenario
from mmwave_map_localization.simharness.stats import FLOAT_FORMAT, write_outputs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

OBSERVATION_COLUMNS = ['bs_id', 'bs_x', 'bs_y', 'bs_z', 'az_deg', 'el_deg', 'tof_ns']

TRACE_COLUMNS = ['tof_ns', 'aod_az_deg', 'aod_el_deg', 'aoa_az_deg', 'aoa_el_deg',
                 'power_dbm', 'path_length_m', 'signature']


class _Parser(argparse.ArgumentParser):
    """ Argument parser whose usage errors exit with the validation exit code """

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f'{self.prog}: error: {message}\n')


def _point(text: str) -> tuple[float, float, float]:
    parts = text.split(',')
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f'"{text}" is not a point x,y,z')
    if len(values) != 3 or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f'"{text}" is not a point x,y,z')
    return values  # type: ignore[return-value]


def _bs_counts(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'"{text}" is not a comma separated list of BS counts')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='mmwave-loc', description='Map-assisted mmWave localization tools.')

    parser.add_argument('--debug', action='store_true', default=False,
                        help='Show debug logging level.')
    parser.add_argument('--log-file', type=Path, default=None,
                        help='Also write logs to a daily rotating file.')
    parser.add_argument('--seed', type=int, default=None,
                        help='Random seed, overrides the scenario rng_seed.')

    subparsers = parser.add_subparsers(dest='command', required=True)

    p_trace = subparsers.add_parser('trace', help='Trace the multipath components between two points.')
    p_trace.add_argument('--map', type=Path, required=True, help='Map JSON file.')
    p_trace.add_argument('--tx', type=_point, required=True, help='Transmitter position x,y,z (m).')
    p_trace.add_argument('--rx', type=_point, required=True, help='Receiver position x,y,z (m).')
    p_trace.add_argument('--freq', type=float, default=None, help='Carrier frequency (Hz).')
    p_trace.add_argument('--tess', type=int, default=None, help='Launch grid tessellation factor.')
    p_trace.add_argument('--method', type=str.lower, default=None, choices=[m.value for m in TraceMethod],
                         help='Path search method.')

    p_locate = subparsers.add_parser('locate', help='Estimate a user position from path observations.')
    p_locate.add_argument('--map', type=Path, required=True, help='Map JSON file.')
    p_locate.add_argument('--obs', type=Path, required=True,
                          help=f'Observation CSV with columns {", ".join(OBSERVATION_COLUMNS)}.')
    p_locate.add_argument('-k', type=int, default=3, help='Interaction cap of candidate generation.')
    p_locate.add_argument('--threshold', type=float, default=0.40, help='Cluster linkage distance (m).')
    p_locate.add_argument('--tess', type=int, default=20,
                          help='Launch grid tessellation factor for checking tied clusters against the map; 0 skips it.')

    p_simulate = subparsers.add_parser('simulate', help='Run a Monte Carlo localization scenario.')
    p_simulate.add_argument('--scenario', type=Path, required=True, help='Scenario JSON file.')
    p_simulate.add_argument('--out', type=Path, required=True, help='Output directory.')
    p_simulate.add_argument('--sigma-tof', type=float, default=None, help='Time of flight noise (ns).')
    p_simulate.add_argument('--bs-counts', type=_bs_counts, default=None, help='BS counts to run, e.g. 1,2,3.')
    p_simulate.add_argument('--workers', type=int, default=None, help='Worker process count.')

    p_validate = subparsers.add_parser('validate-map', help='Validate a map file and print a summary.')
    p_validate.add_argument('map', type=Path, help='Map JSON file.')

    return parser


def _trace(args: argparse.Namespace) -> int:
    overrides = {}
    if args.freq is not None:
        overrides['frequency_hz'] = args.freq
    if args.tess is not None:
        overrides['tessellation_factor'] = args.tess
    if args.method is not None:
        overrides['method'] = args.method
    cfg = TraceConfig(**overrides)

    indoor_map = load_map_file(args.map)
    components = trace(indoor_map, args.tx, args.rx, cfg)

    table = pd.DataFrame(
        [
            {
                'tof_ns': c.tof * 1e9,
                'aod_az_deg': math.degrees(c.aod[0]),
                'aod_el_deg': math.degrees(c.aod[1]),
                'aoa_az_deg': math.degrees(c.aoa[0]),
                'aoa_el_deg': math.degrees(c.aoa[1]),
                'power_dbm': c.received_power_dbm,
                'path_length_m': c.path_length,
                'signature': c.signature,
            }
            for c in components
        ],
        columns=TRACE_COLUMNS,
    )
    table.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')

    logger.info(f'{len(components)} components traced')

    return EXIT_OK


def read_observations(path: Path) -> list[PathObservation]:
    """ Reads an observation CSV, angles in degrees and time of flight in ns """
    frame = pd.read_csv(path, dtype={'bs_id': str})
    missing = [c for c in OBSERVATION_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f'observation file {path} lacks columns {", ".join(missing)}')

    return [
        PathObservation(
            bs_id=str(row.bs_id),
            bs_position=np.array([row.bs_x, row.bs_y, row.bs_z], dtype=np.float64),
            angle=(math.radians(row.az_deg), math.radians(row.el_deg)),
            tof=row.tof_ns * 1e-9,
        )
        for row in frame.itertuples(index=False)
    ]


def _locate(args: argparse.Namespace) -> int:
    indoor_map = load_map_file(args.map)
    observations = read_observations(args.obs)

    trace_cfg = TraceConfig(tessellation_factor=args.tess) if args.tess > 0 else None
    position, diagnostics = locate(indoor_map, observations, args.k, args.threshold, trace_cfg)

    report = {
        'position': [float(v) for v in position],
        'ambiguous': diagnostics.ambiguous,
        'observations': len(observations),
        'candidates': len(diagnostics.candidates),
        'clusters': [
            {
                'centroid': [round(float(v), 6) for v in c.centroid],
                'members': c.member_count,
                'distinct_observations': c.distinct_observations,
                'rms_radius_m': round(c.rms_radius, 6),
            }
            for c in diagnostics.clusters[:5]
        ],
    }
    print(json.dumps(report, indent=2))

    return EXIT_OK


def _simulate(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.scenario)

    overrides = {}
    if args.seed is not None:
        overrides['rng_seed'] = args.seed
    if args.sigma_tof is not None:
        overrides['sigma_tof_ns'] = args.sigma_tof
    if args.bs_counts is not None:
        overrides['bs_counts'] = args.bs_counts
    if args.workers is not None:
        overrides['workers'] = args.workers
    if overrides:
        cfg = ScenarioConfig(**{**cfg.model_dump(), **overrides})
        logger.info(f'Scenario overrides applied: {overrides}')

    stats = run_scenario(cfg, scenario_dir=args.scenario.parent)
    write_outputs(stats, args.out)

    return EXIT_OK


def _validate_map(args: argparse.Namespace) -> int:
    indoor_map = load_map_file(args.map)
    lo, hi = indoor_map.bounding_box
    print(f'{indoor_map.name}: {len(indoor_map)} surfaces, bounds {lo.tolist()} - {hi.tolist()}')
    return EXIT_OK


COMMANDS = {
    'trace': _trace,
    'locate': _locate,
    'simulate': _simulate,
    'validate-map': _validate_map,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """ Runs one subcommand

    Args:
        argv (Optional[Sequence[str]], optional): arguments without the program name. Defaults to sys.argv[1:].

    Returns:
        int: 0 on success, 1 on invalid input or usage, 2 on I/O failure
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_INVALID

    setup_logging(args.debug, args.log_file)

    try:
        return COMMANDS[args.command](args)
    except ValueError as e:
        # pydantic ValidationError, JSON errors and every library error land here
        logger.debug(f'{args.command} failed', exc_info=True)
        print(f'error: {e}', file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        logger.debug(f'{args.command} failed', exc_info=True)
        print(f'error: {e}', file=sys.stderr)
        return EXIT_IO


def main():
    """ Main method of the mmwave-loc command """
    sys.exit(dispatch())
