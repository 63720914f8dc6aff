"""
RiskTrack Main Application
Command-line front end for risk-sensitive multi-agent tracking experiments

Usage:
    python src/main.py synth --preset basic --n 1 --theta 0
    python src/main.py sweep-n --config config.yaml --out results
    python src/main.py theta-star --preset basic --format json
    python src/main.py trajectories --mode risk_averse --seed 7
    python src/main.py rerun results/manifest_sweep_n.json
    python src/main.py --help
"""

import argparse
import dataclasses
import os
import sys
from typing import List, Optional

from colorama import Fore, Style, init
from numpy.linalg import LinAlgError

# Add src directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src import __version__
from src.errors import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, ConfigError, RiskTrackError,
                        ThetaAboveCritical)
from src.experiments.commands import (TRAJECTORY_MODES, cmd_sweep_n, cmd_synth, cmd_theta_star,
                                      cmd_trajectories)
from src.experiments.output import read_manifest
from src.model.system import PRESETS
from src.utils.config import FORMATS, LOG_LEVELS, MEASUREMENT_MODES, ExperimentConfig, load_config
from src.utils.logger import setup_logger

init()

logger = setup_logger("main")


def ok(message: str):
    print(f"{Fore.GREEN}✅ {message}{Style.RESET_ALL}")


def caution(message: str):
    print(f"{Fore.YELLOW}⚠️  {message}{Style.RESET_ALL}")


def failure(message: str):
    print(f"{Fore.RED}❌ {message}{Style.RESET_ALL}", file=sys.stderr)


def build_config(args) -> ExperimentConfig:
    """Config file (or defaults for a bare preset) with command-line overrides applied"""
    if args.config or not args.preset:
        config = load_config(args.config)
    else:
        config = ExperimentConfig()

    if args.preset:
        d = args.dimension if args.dimension is not None else config.system.d
        config = config.replace(system=PRESETS[args.preset](d=d, epsilon=config.system.epsilon))
    if args.epsilon is not None:
        config = config.replace(system=config.system.with_epsilon(args.epsilon))
    if args.seed is not None:
        config = config.replace(sim=config.sim.replace(seed=args.seed))

    return with_output(config, args.out, args.format)


def with_output(config: ExperimentConfig, directory: Optional[str],
                fmt: Optional[str] = None) -> ExperimentConfig:
    output = config.output
    if directory:
        output = dataclasses.replace(output, directory=directory)
    if fmt:
        output = dataclasses.replace(output, format=fmt)
    return config.replace(output=output)


def resolve_run(args):
    """(command, config, command arguments), from the command line or a manifest"""
    if args.command != "rerun":
        return args.command, build_config(args), args
    command, config, arguments = read_manifest(args.manifest)
    if command not in COMMANDS:
        raise ConfigError(f"{args.manifest}: unknown command {command!r}", field="command")
    logger.info(f"Re-running {command} from {args.manifest}")
    return command, with_output(config, args.out), argparse.Namespace(**arguments)


def run_synth(config: ExperimentConfig, args) -> int:
    summary = cmd_synth(config, args.n, args.theta, args.measurement)
    ok(f"Synthesized n={args.n} theta={args.theta:g} ({args.measurement}): "
       f"cost per agent {summary['cost_per_agent']:.6g}")
    print(f"📁 {os.path.join(config.output.directory, 'synth.json')}")
    return EXIT_OK


def run_sweep(config: ExperimentConfig, args) -> int:
    rows = cmd_sweep_n(config)
    for row in rows:
        label = f"n={row.n:<3} theta={row.theta:<8g} eps={row.epsilon:<8g} {row.mode:<9}"
        if row.status == "ok":
            ok(f"{label} cost {row.analytic_cost:.6g}")
        elif row.status == "above_critical":
            caution(f"{label} above critical")
        else:
            failure(f"{label} {row.message}")
    print(f"📊 {len(rows)} rows written to {config.output.directory}")
    return EXIT_OK


def run_theta_star(config: ExperimentConfig, args) -> int:
    rows = cmd_theta_star(config)
    for row in rows:
        cells = [f"{row[key]:.6g}" if row[key] is not None else "n/a"
                 for key in ("theta_star", "theta_I_star")]
        ok(f"n={row['n']:<3} theta*={cells[0]:<10} theta_I*={cells[1]}")
    print(f"📊 {len(rows)} rows written to {config.output.directory}")
    return EXIT_OK


def run_trajectories(config: ExperimentConfig, args) -> int:
    result = cmd_trajectories(config, args.mode)
    ok(f"{args.mode}: theta={result['theta']:g}, cost {result['trajectory'].total_cost:.6g}")
    print(f"📁 trajectories written to {config.output.directory}")
    return EXIT_OK


COMMANDS = {
    "synth": run_synth,
    "sweep-n": run_sweep,
    "theta-star": run_theta_star,
    "trajectories": run_trajectories,
}


def parse_args(argv: Optional[List[str]] = None):
    """Parse command line arguments"""
    output_flags = argparse.ArgumentParser(add_help=False)
    output_flags.add_argument("--out", help="Output directory")
    output_flags.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS,
                              help="Console log level")

    common = argparse.ArgumentParser(add_help=False, parents=[output_flags])
    common.add_argument("--config", help="YAML config file (default: $RISKTRACK_CONFIG or config.yaml)")
    common.add_argument("--format", choices=FORMATS, help="Table format")
    common.add_argument("--seed", type=int, help="Simulation seed")
    common.add_argument("--preset", choices=sorted(PRESETS), help="Use a preset system")
    common.add_argument("--dimension", "-d", type=int, help="Preset state dimension")
    common.add_argument("--epsilon", type=float, help="Pursuer noise scale")

    parser = argparse.ArgumentParser(
        description="RiskTrack - Risk-Sensitive Multi-Agent Tracking",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python src/main.py synth --preset basic --n 1 --theta 0
  python src/main.py synth --preset basic --n 4 --theta 0.5 --measurement imperfect --epsilon 0.01
  python src/main.py sweep-n --config config.yaml
  python src/main.py theta-star --preset basic --epsilon 1e-8
  python src/main.py trajectories --mode risk_averse
  python src/main.py rerun results/manifest_trajectories_risk_averse.json

Exit codes:
  0 ok, 2 config error, 3 theta above critical, 4 numerical failure
"""
    )
    parser.add_argument("--version", action="version", version=f"RiskTrack {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    synth = subparsers.add_parser("synth", parents=[common], help="Synthesize one controller")
    synth.add_argument("--n", type=int, default=1, help="Number of pursuers")
    synth.add_argument("--theta", type=float, default=0.0, help="Risk parameter")
    synth.add_argument("--measurement", choices=MEASUREMENT_MODES, default="perfect")

    subparsers.add_parser("sweep-n", parents=[common], help="Cost per agent over the sweep grid")
    subparsers.add_parser("theta-star", parents=[common], help="Critical risk parameters versus n")

    trajectories = subparsers.add_parser("trajectories", parents=[common],
                                         help="Simulate one risk attitude")
    trajectories.add_argument("--mode", choices=TRAJECTORY_MODES, default="risk_neutral")

    rerun = subparsers.add_parser("rerun", parents=[output_flags],
                                  help="Repeat the run recorded in a manifest")
    rerun.add_argument("manifest", help="manifest_<run>.json written by an earlier run")

    return parser.parse_args(argv)


def main_entry(argv: Optional[List[str]] = None) -> int:
    """Main entry point with argument parsing; returns the exit code"""
    args = parse_args(argv)
    if args.log_level:
        setup_logger(log_level=args.log_level)

    try:
        command, config, command_args = resolve_run(args)
        level = args.log_level or os.getenv("RISKTRACK_LOG_LEVEL") or config.logging.level
        setup_logger(log_level=level, log_file=config.logging.file)
        logger.info(f"RiskTrack {__version__}: {command}")
        return COMMANDS[command](config, command_args)

    except ThetaAboveCritical as e:
        caution(str(e))
        logger.info(f"above critical: {e}")
        return e.exit_code
    except RiskTrackError as e:
        failure(f"{type(e).__name__}: {e}")
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        print("\n👋 Interrupted")
        return 130
    except (LinAlgError, ArithmeticError, ValueError) as e:
        failure(f"Numerical failure: {type(e).__name__}: {e}")
        logger.error(f"{args.command} failed numerically: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        failure(f"Startup error: {e}")
        logger.error(f"Startup error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main_entry())
