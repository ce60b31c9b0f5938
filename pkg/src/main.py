import argparse
import logging
import math
import os
import sys
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel

from diffusion import (
    DiffusionProblem,
    classify_regime,
    fractional_msd,
    moment_exponent,
    solve_l1_stepping,
    solve_mode_exact,
)
from fitting import MEDIA_EXPONENTS, fit_power_law, fit_report, ingest_csv, predict_attenuation
from fracops import AccuracyLossError, ComplexField, FractionalOrders, GridSpec
from quantum import (
    POTENTIAL_KINDS,
    PhysicalConstants,
    PotentialSpec,
    band_structure,
    bandwidth,
    corrected_momentum_energy_check,
    dispersion_energy,
    evolve_free_fractional,
    frequency_from_energy,
    gap_at_zone_edge,
    kinetic_energy,
    momentum_from_wavenumber,
    planck_energy,
    quadratic_kinetic_energy,
    split_step_evolve,
)
from statmech import STATISTICS, EnsembleParams, mean_energy, tabulate
from stochastic import (
    FbmParams,
    StableParams,
    TrajectoryEnsemble,
    estimate_indices,
    fbm_paths,
    fractional_moments,
    hurst_from_eta,
    levy_flight_ensemble,
)
from store import FORMATS, ArtifactStore, read_ensemble, read_json
from utils import load_config, parse_float_list, parse_range

VERSION = "0.1.0"
DEFAULT_OUTPUT_DIR = "output"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Command line that does not match the grammar"""


class CliParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        self.options: Dict[str, argparse.Action] = {}
        super().__init__(*args, **kwargs)
        for parent in kwargs.get("parents", []):
            self.options.update(getattr(parent, "options", {}))

    def add_argument(self, *args, **kwargs):
        action = super().add_argument(*args, **kwargs)
        self.options[action.dest] = action
        return action

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class RunConfig(BaseModel):
    """Resolved configuration echoed into every manifest"""

    subcommand: str
    parameters: Dict[str, Any]
    output_dir: str
    output_format: str = "csv"
    seed: Optional[int] = None
    version: str = VERSION


def configure_logging():
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    log_file = os.getenv("FRACQ_LOG_FILE")
    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=os.getenv("FRACQ_LOG_LEVEL", "INFO").upper(),
        format=LOG_FORMAT,
        handlers=handlers,
    )


def constants_from_args(args) -> PhysicalConstants:
    d_mu = args.d_mu if args.d_mu is not None else 1.0 / (2 * args.mass)
    return PhysicalConstants(mass=args.mass, hbar=args.hbar, d_mu=d_mu, h_eta=args.h_eta)


def gaussian_packet(grid: GridSpec, center: float, width: float, k0: float) -> ComplexField:
    """Unit-norm Gaussian wave packet with mean wavenumber k0"""
    x = grid.points
    field = ComplexField(grid, np.exp(-((x - center) ** 2) / (4 * width ** 2) + 1j * k0 * x))
    return ComplexField(grid, field.values / field.norm())


def orders_header(orders: FractionalOrders) -> Dict:
    return {"eta": orders.eta, "mu": orders.mu}


def cmd_diffuse(args, store: ArtifactStore) -> Dict:
    orders = FractionalOrders(args.eta, args.mu)
    grid = GridSpec.centered(args.n, args.length)
    problem = DiffusionProblem(orders, args.gamma, grid, ComplexField.delta(grid, args.center))
    if args.solver == "mode":
        solution = solve_mode_exact(problem, parse_float_list(args.t))
    else:
        solution = solve_l1_stepping(problem, args.dt, args.steps, args.grading)

    delta = args.delta if args.delta is not None else 0.9 * orders.mu
    moments = fractional_msd(solution, delta)
    header = {"orders": orders_header(orders), "gamma": args.gamma, "solver": args.solver, "center": args.center}
    store.save_snapshots(solution.times, solution.snapshots, header)
    store.save_table("moments", pd.DataFrame({"time": solution.times, "moment": moments}))
    return {
        "regime": classify_regime(orders),
        "delta": delta,
        "moment_exponent": moment_exponent(orders, delta),
        "snapshots": len(solution.snapshots),
    }


def cmd_schrodinger(args, store: ArtifactStore) -> Dict:
    orders = FractionalOrders(args.eta, args.mu)
    constants = constants_from_args(args)
    grid = GridSpec.centered(args.n, args.length)
    psi = gaussian_packet(grid, args.x0, args.sigma, args.k0)
    potential = None
    if args.potential != "none":
        potential = PotentialSpec(args.potential, args.v0, args.period, args.width)

    if orders.eta == 1:
        final = split_step_evolve(psi, potential, constants, orders, args.dt, args.steps)
        t = args.dt * args.steps
    else:
        if potential is not None:
            raise ValueError("time-fractional evolution supports only a vanishing potential")
        t = args.t
        final = evolve_free_fractional(psi, constants, orders, t)

    times, fields = ([0.0, t], [psi, final]) if t > 0 else ([0.0], [psi])
    header = {
        "orders": orders_header(orders),
        "constants": asdict(constants),
        "potential": None if potential is None else asdict(potential),
    }
    store.save_snapshots(times, fields, header, prefix="wavefunction")
    return {"t": t, "norm_initial": psi.norm(), "norm_final": final.norm()}


def cmd_bands(args, store: ArtifactStore) -> Dict:
    orders = FractionalOrders(1.0, args.mu)
    constants = constants_from_args(args)
    kinds = POTENTIAL_KINDS if args.potential == "all" else (args.potential,)
    edge = math.pi / args.period
    q_values = np.linspace(-edge, edge, args.q_points)

    summary = {}
    for kind in kinds:
        potential = PotentialSpec(kind, args.v0, args.period, args.width)
        structure = band_structure(
            potential, constants, orders, args.n_bands, args.plane_waves, q_values, check_convergence=args.check
        )
        header = {
            "potential": asdict(potential),
            "constants": asdict(constants),
            "orders": orders_header(orders),
            "n_plane_waves": args.plane_waves,
        }
        store.save_bands(structure.q_values, structure.bands, header, name=f"bands_{kind}")
        summary[kind] = {"bandwidth_0": bandwidth(structure, 0)}
        if structure.n_bands > 1:
            summary[kind]["gap_0"] = gap_at_zone_edge(structure, 0)
    return summary


def cmd_sample_levy(args, store: ArtifactStore) -> Dict:
    params = StableParams(args.mu, args.gamma)
    ensemble = levy_flight_ensemble(params, args.paths, args.steps, args.dt, args.seed)
    header = {"kind": ensemble.kind, "seed": ensemble.seed, "params": asdict(params)}
    store.save_ensemble(ensemble.times, ensemble.positions, header)
    delta = args.delta if args.delta is not None else 0.5 * args.mu
    moments = fractional_moments(ensemble, delta)
    store.save_table("moments", pd.DataFrame({"time": ensemble.times, "moment": moments}))
    return {"paths": ensemble.n_paths, "delta": delta, "expected_exponent": delta / args.mu}


def cmd_sample_fbm(args, store: ArtifactStore) -> Dict:
    hurst = args.hurst if args.hurst is not None else hurst_from_eta(args.eta)
    params = FbmParams(hurst, args.steps, args.dt)
    ensemble = fbm_paths(params, args.paths, args.seed, method=args.method)
    header = {"kind": ensemble.kind, "seed": ensemble.seed, "params": asdict(params)}
    store.save_ensemble(ensemble.times, ensemble.positions, header)
    store.save_table("moments", pd.DataFrame({"time": ensemble.times, "moment": fractional_moments(ensemble, 2.0)}))
    return {"paths": ensemble.n_paths, "hurst": hurst, "expected_exponent": 2 * hurst}


def cmd_estimate(args, store: ArtifactStore) -> Dict:
    times, positions = read_ensemble(args.input)
    header_path = os.path.join(os.path.dirname(args.input), "ensemble_header.json")
    header = read_json(header_path) if os.path.exists(header_path) else {}
    kind = args.kind or header.get("kind")
    if kind is None:
        raise ValueError("ensemble kind unknown; pass --kind levy or --kind fbm")
    ensemble = TrajectoryEnsemble(positions.shape[0], times, positions, header.get("seed", 0), kind)
    estimate, halfwidth = estimate_indices(ensemble, args.mu_prior)
    result = {"kind": kind, "index": "mu" if kind == "levy" else "hurst", "estimate": estimate, "halfwidth": halfwidth}
    store.save_json("estimate", result)
    return result


def cmd_statmech(args, store: ArtifactStore) -> Dict:
    orders = FractionalOrders(1.0, args.mu)
    params = EnsembleParams(args.beta, args.chemical_potential)
    energies = np.linspace(args.e_max / args.points, args.e_max, args.points)
    statistics = None if args.statistics == "none" else args.statistics
    store.save_table("statmech", tabulate(energies, params, orders, statistics))
    return {"mean_energy": mean_energy(params, orders)}


def cmd_fit(args, store: ArtifactStore) -> Dict:
    dataset = ingest_csv(args.input, args.frequency_unit, args.attenuation_unit)
    frequency_range = parse_range(args.range) if args.range else None
    if frequency_range is None and args.medium is not None:
        frequency_range = MEDIA_EXPONENTS[args.medium]["range"]
    fit = fit_power_law(dataset, frequency_range)
    report = fit_report(fit)
    report["units"] = {"frequency": dataset.frequency_unit, "attenuation": dataset.attenuation_unit}
    if args.medium is not None:
        report["reference_mu"] = MEDIA_EXPONENTS[args.medium]["mu"]
    store.save_json("fit", report)
    predictions = pd.DataFrame(
        {"omega": dataset.omega, "alpha": dataset.alpha, "predicted": predict_attenuation(fit, dataset.omega)}
    )
    store.save_table("predictions", predictions)
    return report


def cmd_relations(args, store: ArtifactStore) -> Dict:
    orders = FractionalOrders(args.eta, args.mu)
    constants = constants_from_args(args)
    k = np.linspace(-args.k_max, args.k_max, args.points)
    p = momentum_from_wavenumber(k, constants, orders, even=args.even)
    energy = dispersion_energy(k, constants, orders)
    store.save_table(
        "relations_k",
        pd.DataFrame(
            {
                "k": k,
                "p": p,
                "energy": energy,
                "kinetic_energy": kinetic_energy(p, constants, orders),
                "quadratic_kinetic_energy": quadratic_kinetic_energy(p, constants),
                "nu": frequency_from_energy(energy, constants, orders.eta),
            }
        ),
    )
    nu = np.linspace(0.0, args.nu_max, args.points)
    store.save_table("relations_nu", pd.DataFrame({"nu": nu, "energy": planck_energy(nu, constants, orders.eta)}))
    kappa, p_corrected = corrected_momentum_energy_check(args.energy, constants, orders)
    return {"h_mu": constants.h_mu(orders.mu), "energy": args.energy, "kappa": kappa, "p_corrected": p_corrected}


HANDLERS = {
    "diffuse": cmd_diffuse,
    "schrodinger": cmd_schrodinger,
    "bands": cmd_bands,
    "sample-levy": cmd_sample_levy,
    "sample-fbm": cmd_sample_fbm,
    "estimate": cmd_estimate,
    "statmech": cmd_statmech,
    "fit": cmd_fit,
    "relations": cmd_relations,
}


def _add_orders(parser, eta: Optional[float] = 1.0, mu: float = 2.0):
    if eta is not None:
        parser.add_argument("--eta", type=float, default=eta, help="time-fractional order in (0, 1]")
    parser.add_argument("--mu", type=float, default=mu, help="space-fractional order in (0, 2]")


def _add_constants(parser):
    parser.add_argument("--mass", type=float, default=1.0)
    parser.add_argument("--hbar", type=float, default=1.0)
    parser.add_argument("--d-mu", type=float, default=None, help="D_mu; defaults to 1/(2 mass)")
    parser.add_argument("--h-eta", type=float, default=1.0)


def build_parser() -> Tuple[CliParser, Dict[str, CliParser]]:
    common = CliParser(add_help=False)
    common.add_argument("--output-dir", default=os.getenv("FRACQ_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
    common.add_argument("--format", dest="output_format", choices=FORMATS, default="csv")
    common.add_argument("--config", default=None, help="JSON file with default parameter values")

    parser = CliParser(prog="fracq", description="Fractional diffusion, quantum and statistics toolkit")
    parser.add_argument("--version", action="version", version=VERSION)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    commands: Dict[str, CliParser] = {}

    sub = subparsers.add_parser("diffuse", parents=[common], help="solve the anomalous diffusion equation")
    _add_orders(sub)
    sub.add_argument("--gamma", type=float, default=1.0)
    sub.add_argument("--n", type=int, default=512)
    sub.add_argument("--length", type=float, default=20.0)
    sub.add_argument("--center", type=float, default=0.0)
    sub.add_argument("--solver", choices=("mode", "l1"), default="mode")
    sub.add_argument("--t", default="1.0", help="comma-separated output times for the mode solver")
    sub.add_argument("--dt", type=float, default=1e-3)
    sub.add_argument("--steps", type=int, default=1000)
    sub.add_argument("--grading", type=float, default=1.0)
    sub.add_argument("--delta", type=float, default=None)
    commands["diffuse"] = sub

    sub = subparsers.add_parser("schrodinger", parents=[common], help="evolve a wave packet")
    _add_orders(sub)
    _add_constants(sub)
    sub.add_argument("--n", type=int, default=256)
    sub.add_argument("--length", type=float, default=40.0)
    sub.add_argument("--potential", choices=("none",) + POTENTIAL_KINDS, default="none")
    sub.add_argument("--v0", type=float, default=0.0)
    sub.add_argument("--period", type=float, default=4.0)
    sub.add_argument("--width", type=float, default=0.25)
    sub.add_argument("--x0", type=float, default=0.0)
    sub.add_argument("--sigma", type=float, default=1.0)
    sub.add_argument("--k0", type=float, default=0.0)
    sub.add_argument("--dt", type=float, default=1e-3)
    sub.add_argument("--steps", type=int, default=1000)
    sub.add_argument("--t", type=float, default=1.0, help="evolution time when eta < 1")
    commands["schrodinger"] = sub

    sub = subparsers.add_parser("bands", parents=[common], help="plane-wave band structures")
    _add_orders(sub, eta=None)
    _add_constants(sub)
    sub.add_argument("--potential", choices=("all",) + POTENTIAL_KINDS, default="all")
    sub.add_argument("--v0", type=float, default=1.0)
    sub.add_argument("--period", type=float, default=1.0)
    sub.add_argument("--width", type=float, default=0.25)
    sub.add_argument("--n-bands", type=int, default=4)
    sub.add_argument("--plane-waves", type=int, default=41)
    sub.add_argument("--q-points", type=int, default=41)
    sub.add_argument("--check", action="store_true", help="verify truncation by doubling the plane waves")
    commands["bands"] = sub

    sub = subparsers.add_parser("sample-levy", parents=[common], help="Levy flight ensemble")
    sub.add_argument("--mu", type=float, default=1.5)
    sub.add_argument("--gamma", type=float, default=1.0)
    sub.add_argument("--paths", type=int, default=1000)
    sub.add_argument("--steps", type=int, default=100)
    sub.add_argument("--dt", type=float, default=0.01)
    sub.add_argument("--delta", type=float, default=None)
    sub.add_argument("--seed", type=int, default=0)
    commands["sample-levy"] = sub

    sub = subparsers.add_parser("sample-fbm", parents=[common], help="fractional Brownian motion ensemble")
    sub.add_argument("--hurst", type=float, default=None)
    sub.add_argument("--eta", type=float, default=1.0, help="used as H = eta/2 when --hurst is absent")
    sub.add_argument("--paths", type=int, default=1000)
    sub.add_argument("--steps", type=int, default=100)
    sub.add_argument("--dt", type=float, default=0.01)
    sub.add_argument("--method", choices=("circulant", "cholesky"), default="circulant")
    sub.add_argument("--seed", type=int, default=0)
    commands["sample-fbm"] = sub

    sub = subparsers.add_parser("estimate", parents=[common], help="estimate mu or H from an ensemble CSV")
    sub.add_argument("--input", required=True)
    sub.add_argument("--kind", choices=("levy", "fbm"), default=None)
    sub.add_argument("--mu-prior", type=float, default=1.0)
    commands["estimate"] = sub

    sub = subparsers.add_parser("statmech", parents=[common], help="energy PDF and occupancy tables")
    sub.add_argument("--mu", type=float, default=2.0)
    sub.add_argument("--beta", type=float, default=1.0)
    sub.add_argument("--chemical-potential", type=float, default=0.0)
    sub.add_argument("--statistics", choices=("none",) + STATISTICS, default="none")
    sub.add_argument("--e-max", type=float, default=10.0)
    sub.add_argument("--points", type=int, default=200)
    commands["statmech"] = sub

    sub = subparsers.add_parser("fit", parents=[common], help="power-law fit of attenuation data")
    sub.add_argument("--input", required=True)
    sub.add_argument("--range", default=None, help="frequency window lo:hi")
    sub.add_argument("--medium", choices=tuple(MEDIA_EXPONENTS), default=None)
    sub.add_argument("--frequency-unit", default="Hz")
    sub.add_argument("--attenuation-unit", default="dB/cm")
    commands["fit"] = sub

    sub = subparsers.add_parser("relations", parents=[common], help="momentum, energy and frequency tables")
    _add_orders(sub)
    _add_constants(sub)
    sub.add_argument("--k-max", type=float, default=10.0)
    sub.add_argument("--nu-max", type=float, default=10.0)
    sub.add_argument("--points", type=int, default=101)
    sub.add_argument("--energy", type=float, default=1.0)
    sub.add_argument("--even", action="store_true", help="even extension of p(k) to k < 0")
    commands["relations"] = sub

    return parser, commands


def _config_value(action: argparse.Action, key: str, value: Any) -> Any:
    """Convert and check a config value the way argparse treats the flag"""
    if action.type is not None and value is not None:
        try:
            value = action.type(value)
        except (TypeError, ValueError):
            raise ValueError(f"config value {value!r} for {key!r} is not a valid {action.type.__name__}")
    if action.choices is not None and value not in action.choices:
        choices = ", ".join(map(str, action.choices))
        raise ValueError(f"config value {value!r} for {key!r} must be one of {choices}")
    return value


def _apply_config(args, parser: CliParser, commands: Dict[str, CliParser], argv: Optional[List[str]]):
    config = load_config(args.config)
    if not config:
        return args
    section = config.get(args.subcommand, config)
    options = commands[args.subcommand].options
    defaults = {}
    for key, value in section.items():
        dest = key.replace("-", "_")
        if dest in options:
            defaults[dest] = _config_value(options[dest], key, value)
        elif not isinstance(value, dict):
            logger.warning(f"Ignoring unknown config key {key!r} for {args.subcommand}")
    commands[args.subcommand].set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and write its artifacts; returns the exit code"""
    load_dotenv()
    configure_logging()
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, parser, commands, argv)
        logger.info(f"Running {args.subcommand}")

        store = ArtifactStore(args.output_dir, args.output_format)
        summary = HANDLERS[args.subcommand](args, store)

        internal = ("subcommand", "output_dir", "output_format", "config", "seed")
        config = RunConfig(
            subcommand=args.subcommand,
            parameters={key: value for key, value in vars(args).items() if key not in internal},
            output_dir=args.output_dir,
            output_format=args.output_format,
            seed=getattr(args, "seed", None),
        )
        manifest = config.model_dump()
        manifest["summary"] = summary
        store.save_manifest(manifest)
        logger.info(f"{args.subcommand} finished; artifacts in {args.output_dir}")
        return 0
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    except AccuracyLossError as e:
        logger.error(f"Numerical accuracy failure: {str(e)}")
        print(f"accuracy failure: {str(e)}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logger.error(f"Invalid input: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(run())
