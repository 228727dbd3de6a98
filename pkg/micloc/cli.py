"""Command-line entry point: search, sphere, noise-sweep and analyze.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from dotenv import load_dotenv

from micloc.analysis import analyze_radial, radial_rank_correlation, shell_summary
from micloc.config import apply_overrides, load_experiment_config
from micloc.errors import ConfigurationError, MiclocError, ResultsFileError
from micloc.geom import distance_to_nearest_wall
from micloc.results import load_results, write_noise_sweep, write_results, write_search_report
from micloc.search import run_noise_sweep, run_search, run_sphere_probe

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def setup_logging(output_directory: Path, command: str) -> Path:
    log_dir = Path(output_directory) / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / f"{command}.log"
    logging.basicConfig(
        level=logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr), logging.FileHandler(log_file, mode="w", encoding="utf-8")],
        force=True,
    )
    return log_file


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{value}'")
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {number}")
    return number


def _non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {number}")
    return number


def _positive_float(value: str) -> float:
    number = float(value)
    if not (math.isfinite(number) and number > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {value}")
    return number


def _non_negative_float(value: str) -> float:
    number = float(value)
    if not (math.isfinite(number) and number >= 0):
        raise argparse.ArgumentTypeError(f"must be a non-negative number, got {value}")
    return number


def _add_experiment_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, required=True, help="Path to experiment config JSON")
    parser.add_argument("--seed", type=_non_negative_int, help="Master seed (overrides config and MICLOC_SEED)")
    parser.add_argument("--jobs", type=_positive_int, help="Number of candidates evaluated in parallel")
    parser.add_argument("--snr", type=float, action="append", help="Target SNR in dB (repeatable)")
    parser.add_argument("--noise", type=str, help="white | file:PATH | none")
    parser.add_argument("--out", type=Path, help="Output directory (default: output_directory of the config)")
    parser.add_argument("--gamma", type=_positive_float, action="append", help="Ball radius in meters (repeatable)")
    parser.add_argument("--candidates", type=_positive_int, help="Candidates per gamma")
    parser.add_argument("--debug-audio", action="store_true", help="Write rendered WAVs and the RIR (WAV and CSV) of every n-th candidate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micloc", description="Monte-Carlo search for the microphone position with the lowest CER")
    subparsers = parser.add_subparsers(dest="command", required=True)

    search = subparsers.add_parser("search", help="Search the gamma-balls around the nominal microphone")
    _add_experiment_arguments(search)

    sphere = subparsers.add_parser("sphere", help="Evaluate positions at an exact distance from the nominal microphone")
    _add_experiment_arguments(sphere)
    sphere.add_argument("--radius", type=_positive_float, help="Sphere radius in meters")
    sphere.add_argument("--count", type=_positive_int, help="Number of positions on the sphere")

    sweep = subparsers.add_parser("noise-sweep", help="Repeat the search at several SNRs over the same candidates")
    _add_experiment_arguments(sweep)

    analyze = subparsers.add_parser("analyze", help="Radial-distance table and shell subset of a results file")
    analyze.add_argument("results_path", type=Path, help="Results JSON written by search or sphere")
    analyze.add_argument("--shell-radius", type=_non_negative_float, help="Radial distance of the shell")
    analyze.add_argument("--shell-tol", type=_non_negative_float, default=0.0001, help="Half width of the shell")
    analyze.add_argument("--out", type=Path, help="Output directory (default: next to the results file)")

    return parser


def _experiment(args, snrs=None):
    config = load_experiment_config(args.config)
    return apply_overrides(
        config,
        seed=args.seed,
        jobs=args.jobs,
        noise=args.noise,
        snrs=snrs if snrs is not None else args.snr,
        output_directory=args.out,
        gammas=args.gamma,
        candidates=args.candidates,
        debug_audio=args.debug_audio,
    )


def _summary_line(result) -> str:
    optimal = result.optimal
    return (f"Optimal position {optimal.position} average CER {optimal.average_cer:.2f} "
            f"radial distance {optimal.radial_distance:.4f}")


def _sweep(experiment, snrs) -> int:
    output_directory = experiment.output_directory
    sweep = run_noise_sweep(experiment.search, snrs, jobs=experiment.jobs, debug_audio_dir=output_directory / "debug_audio")
    write_noise_sweep(sweep, output_directory)
    for snr_db, result in sweep.items():
        print(f"SNR {snr_db:g} dB: {_summary_line(result)}")
    return EXIT_OK


def cmd_search(args) -> int:
    experiment = _experiment(args)
    setup_logging(experiment.output_directory, "search")

    if args.snr and len(args.snr) > 1:
        return _sweep(experiment, list(args.snr))

    result = run_search(experiment.search, jobs=experiment.jobs, debug_audio_dir=experiment.output_directory / "debug_audio")
    write_results(result, experiment.output_directory)
    write_search_report(result, experiment.output_directory)
    print(_summary_line(result))
    return EXIT_OK


def cmd_sphere(args) -> int:
    experiment = _experiment(args)
    setup_logging(experiment.output_directory, "sphere")

    radius = args.radius or experiment.sphere_probe.radius
    count = args.count or experiment.sphere_probe.count
    config = experiment.search

    free_space = distance_to_nearest_wall(config.room, config.nominal_mic)
    if radius > free_space:
        logger.warning(f"⚠️  Sphere radius {radius} m exceeds the {free_space:.3f} m to the nearest wall; "
                       f"points outside the room will be redrawn")

    result = run_sphere_probe(config, radius, count, jobs=experiment.jobs,
                              debug_audio_dir=experiment.output_directory / "debug_audio")
    write_results(result, experiment.output_directory, "sphere")
    write_search_report(result, experiment.output_directory, "sphere")
    print(_summary_line(result))
    return EXIT_OK


def cmd_noise_sweep(args) -> int:
    preliminary = load_experiment_config(args.config)
    snrs = list(args.snr) if args.snr else list(preliminary.noise_sweep_snrs)
    experiment = _experiment(args, snrs=snrs)
    setup_logging(experiment.output_directory, "noise-sweep")
    return _sweep(experiment, snrs)


def cmd_analyze(args) -> int:
    output_directory = args.out or args.results_path.parent
    setup_logging(output_directory, "analyze")

    result = load_results(args.results_path)
    stem = args.results_path.stem

    table = analyze_radial(result)
    radial_path = output_directory / f"{stem}_radial.csv"
    table.to_csv(radial_path, index=False)
    rho, pvalue = radial_rank_correlation(table)
    logger.info(f"✅ Wrote {radial_path}")
    print(f"Radial table: {len(table)} candidates, Spearman rho {rho:.3f} (p={pvalue:.3g})")

    if args.shell_radius is not None:
        shell = shell_summary(result.candidates, args.shell_radius, args.shell_tol)
        shell_path = output_directory / f"{stem}_shell.csv"
        shell.table.to_csv(shell_path, index=False)
        logger.info(f"✅ Wrote {shell_path}")
        if shell.count:
            print(f"Shell {args.shell_radius} ± {args.shell_tol}: {shell.count} candidates, "
                  f"CER min {shell.min_cer:.2f} max {shell.max_cer:.2f} mean {shell.mean_cer:.2f}")
        else:
            print(f"Shell {args.shell_radius} ± {args.shell_tol}: no candidates")

    return EXIT_OK


COMMANDS = {
    "search": cmd_search,
    "sphere": cmd_sphere,
    "noise-sweep": cmd_noise_sweep,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ResultsFileError) as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MiclocError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
