"""
Command line experiment runner

Every subcommand reads a flat KEY=VALUE config (optional), applies flag overrides,
writes JSON/CSV/SVG artifacts under --out and exits with 0 on pass, 1 on fail,
2 when inconclusive and 64 on an invalid configuration.
"""
import csv
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
import typer
from pydantic import ValidationError

from kinetic_selfsim import boltzmann, bounds, evolve, landau, profile, reports, selfsim, vpl
from kinetic_selfsim.config import configure_logging, get_settings, load_experiment_config
from kinetic_selfsim.densities import GaussianMixture
from kinetic_selfsim.errors import ConfigError, KineticError, ParameterError, StabilityError
from kinetic_selfsim.grid import WEIGHT_ENERGY, GridSpec
from kinetic_selfsim.models import (
    BlowupTrend,
    BoundKind,
    CollisionParams,
    ExperimentConfig,
    MonitorRecord,
    RefutationOutcome,
    RefutationVerdict,
    ThetaMode,
    VerdictStatus,
)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64

STATUS_CODES = {
    VerdictStatus.PASS: EXIT_PASS,
    VerdictStatus.FAIL: EXIT_FAIL,
    VerdictStatus.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

app = typer.Typer(
    name="kinetic-selfsim",
    help="Numerical checks of self-similar blow-up for Landau, Boltzmann and VPL profiles.",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOpt = Annotated[Optional[Path], typer.Option("--config", help="Flat KEY=VALUE experiment config")]
OutOpt = Annotated[Optional[Path], typer.Option("--out", help="Output directory")]
ThreadsOpt = Annotated[Optional[int], typer.Option("--threads", help="Worker count")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="Random seed")]
LogFormatOpt = Annotated[Optional[str], typer.Option("--log-format", help="text or json")]
NOpt = Annotated[Optional[int], typer.Option("--n", help="Grid nodes per axis (even)")]
ExtentOpt = Annotated[Optional[float], typer.Option("--extent", help="Grid half-width L")]
GammaOpt = Annotated[Optional[float], typer.Option("--gamma", help="Interaction exponent")]
ThetaOpt = Annotated[Optional[float], typer.Option("--theta", help="Self-similar exponent")]
SOpt = Annotated[Optional[float], typer.Option("--s-exp", help="Angular singularity exponent s")]
ProfileOpt = Annotated[Optional[str], typer.Option("--profile", help="Trial profile or initial density")]
ModeOpt = Annotated[Optional[str], typer.Option("--mode", help="landau-inhom, landau-hom, boltzmann-inhom, boltzmann-hom or vpl")]


class RunContext:
    """Validated config, settings and output directory of one invocation"""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path, threads: int):
        self.cfg = cfg
        self.out_dir = out_dir
        self.threads = threads

    @property
    def grid(self) -> GridSpec:
        return GridSpec(n=self.cfg.n, extent=self.cfg.extent)

    def path(self, name: str) -> Path:
        return self.out_dir / name


def _context(
    config: Optional[Path],
    out: Optional[Path],
    threads: Optional[int],
    seed: Optional[int],
    log_format: Optional[str],
    **overrides: Any,
) -> RunContext:
    settings = get_settings()
    fmt = log_format or settings.log_format
    if fmt not in ("text", "json"):
        raise ConfigError(f"log format must be text or json, got {fmt!r}")
    configure_logging(settings.log_level, fmt)
    cfg = load_experiment_config(config, dict(overrides, seed=seed))
    out_dir = Path(out or settings.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return RunContext(cfg, out_dir, threads or settings.threads)


def _profile_grids(cfg: ExperimentConfig) -> Tuple[GridSpec, GridSpec]:
    w_grid = GridSpec(n=cfg.n, extent=cfg.extent)
    y_grid = GridSpec(n=max(8, (cfg.n // 4) * 2), extent=cfg.extent)
    return w_grid, y_grid


def _initial_density(name: str) -> GaussianMixture:
    if name in ("gaussian", "maxwellian"):
        return GaussianMixture.maxwellian()
    if name == "two-gaussian":
        return GaussianMixture(
            centers=[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], widths=[0.7, 0.7], weights=[0.5, 0.5]
        )
    raise ConfigError(f"unknown density {name!r}; expected gaussian, maxwellian or two-gaussian")


def _require_theta(ctx: RunContext, mode: ThetaMode) -> None:
    verdict = selfsim.check_theta_admissible(ctx.cfg.selfsim_params(), mode)
    if not verdict.admissible:
        raise ConfigError(f"theta={ctx.cfg.theta} is not admissible for {mode.value}: {', '.join(verdict.violations)}")


def _verdict_code(verdict: RefutationVerdict) -> int:
    if verdict.verdict in (RefutationOutcome.REFUTED, RefutationOutcome.TRIVIAL):
        return EXIT_PASS
    return EXIT_INCONCLUSIVE


def coeffs_pipeline(ctx: RunContext) -> int:
    """Coefficients a and c of a Gaussian density against their closed forms."""
    params = ctx.cfg.landau_params()
    mix = _initial_density(ctx.cfg.profile)
    f = mix.on_grid(ctx.grid)
    op = landau.LandauOperator(params, ctx.threads)
    a_bar = op.coeff_a(f).values
    c_bar = op.coeff_c(f).values
    idx = ctx.grid.origin_index
    probes = [(idx, idx, idx), (idx + ctx.cfg.n // 8, idx, idx), (idx, idx - ctx.cfg.n // 8, idx)]
    points = np.array([ctx.grid.nodes()[p] for p in probes])
    exact_a = params.a_const * mix.landau_coefficient(points, params.gamma + 2.0)
    if params.is_coulomb:
        exact_c = params.c_value * mix(points)
    else:
        exact_c = params.c_value * mix.riesz_potential(points, params.gamma)
    rows, errors = [], []
    for p, point, ea, ec in zip(probes, points, exact_a, exact_c):
        na = a_bar[(slice(None), slice(None)) + p]
        err_a = float(np.max(np.abs(na - ea)) / max(np.max(np.abs(ea)), 1e-300))
        err_c = float(abs(c_bar[p] - ec) / max(abs(ec), 1e-300))
        errors.extend([err_a, err_c])
        rows.append([*point.tolist(), float(np.trace(na)), float(np.trace(ea)), float(c_bar[p]), float(ec), err_a, err_c])
    reports.write_csv(["x", "y", "z", "trace_a", "trace_a_exact", "c", "c_exact", "error_a", "error_c"], rows, ctx.path("coeffs.csv"))
    status = VerdictStatus.PASS if max(errors) <= 0.05 else VerdictStatus.FAIL
    reports.write_json({"status": status, "max_relative_error": max(errors), "gamma": params.gamma, "n": ctx.cfg.n}, ctx.path("coeffs.json"))
    return STATUS_CODES[status]


def qlandau_pipeline(ctx: RunContext) -> int:
    """Conservation moments, form agreement and entropy dissipation of Q(f, f)."""
    params = ctx.cfg.landau_params()
    f = _initial_density(ctx.cfg.profile).on_grid(ctx.grid)
    op = landau.LandauOperator(params, ctx.threads)
    q_div = op.collide(f, "divergence")
    q_trace = op.collide(f, "trace")
    moments = landau.collision_invariant_moments(f, params, ctx.threads)
    mass = f.integrate()
    energy = f.integrate(WEIGHT_ENERGY)
    payload: Dict[str, Any] = {
        "moments": moments,
        "sup_q_over_sup_f": q_div.sup() / f.sup(),
        "form_difference": float(np.max(np.abs(q_div.values - q_trace.values)) / max(q_div.sup(), 1e-300)),
        "entropy_dissipation": op.entropy_dissipation(f),
        "entropy_dissipation_alt": op.entropy_dissipation_alt(f),
    }
    ok = abs(moments["mass"]) <= 1e-10 * mass and abs(moments["energy"]) <= 1e-3 * energy
    ok = ok and payload["entropy_dissipation"] >= -1e-8
    payload["status"] = VerdictStatus.PASS if ok else VerdictStatus.FAIL
    reports.write_json(payload, ctx.path("qlandau.json"))
    return STATUS_CODES[payload["status"]]


def bounds_pipeline(ctx: RunContext) -> int:
    kind = ctx.cfg.bound
    if kind in (BoundKind.SPLITTING, BoundKind.KERNEL_ANNULUS):
        raise ConfigError(f"bound {kind.value} has its own entry point; choose a1hi, aloinf, agrad or c")
    exponent = ctx.cfg.exponent
    if exponent is None:
        lower, upper = bounds.exponent_window(kind, ctx.cfg.gamma)
        exponent = 1.5 if math.isinf(upper) else 0.5 * (lower + upper)
    report = bounds.sweep_bounds(kind, exponent, ctx.cfg.gamma, ctx.grid, ctx.cfg.samples, ctx.cfg.seed, ctx.threads)
    reports.write_json(report, ctx.path("bounds.json"))
    reports.write_csv(
        ["sample", "lhs", "rhs", "ratio"],
        ([s.sample_id, s.lhs, s.rhs, s.ratio] for s in report.samples),
        ctx.path("bounds.csv"),
    )
    reports.plot_series(
        [s.sample_id for s in report.samples], {"ratio": [s.ratio for s in report.samples]},
        ctx.path("bounds.svg"), xlabel="sample", ylabel="lhs / rhs",
    )
    return STATUS_CODES[report.status]


def selfsim_errors_pipeline(ctx: RunContext) -> int:
    params = ctx.cfg.selfsim_params()
    _require_theta(ctx, ThetaMode.LANDAU_INHOMOGENEOUS)
    phi = selfsim.PhiModel(beta=ctx.cfg.beta)
    g = GaussianMixture.maxwellian().on_grid(ctx.grid)
    report = selfsim.verify_error_decay(
        g, phi, params, ctx.cfg.t_samples, ctx.cfg.landau_params(), threads=ctx.threads
    )
    hypothesis = selfsim.check_decay_hypothesis(phi, params)
    reports.write_json({"decay": report, "hypothesis": hypothesis}, ctx.path("selfsim_errors.json"))
    reports.write_csv(
        ["term", "predicted_exponent", "measured_slope", "decaying"],
        ([t.name, t.predicted_exponent, t.measured_slope, t.decaying] for t in report.terms),
        ctx.path("selfsim_errors.csv"),
    )
    return STATUS_CODES[report.status]


def refute_landau_pipeline(ctx: RunContext) -> int:
    mode = ctx.cfg.mode if ctx.cfg.mode in (ThetaMode.LANDAU_INHOMOGENEOUS, ThetaMode.LANDAU_HOMOGENEOUS) else ThetaMode.LANDAU_INHOMOGENEOUS
    _require_theta(ctx, mode)
    g = profile.named_profile(ctx.cfg.profile, *_profile_grids(ctx.cfg))
    collision = profile.LandauMoments(ctx.cfg.landau_params(), ctx.threads)
    verdict = profile.refutation_verdict(g, ctx.cfg.selfsim_params(), collision, ctx.threads)
    reports.write_json(verdict, ctx.path("refute_landau.json"))
    return _verdict_code(verdict)


def refute_boltzmann_pipeline(ctx: RunContext) -> int:
    if ctx.cfg.s_exp is None:
        raise ConfigError("refute-boltzmann needs --s-exp")
    try:
        collision = CollisionParams(gamma=ctx.cfg.gamma, s_exp=ctx.cfg.s_exp)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    mode = ctx.cfg.mode if ctx.cfg.mode == ThetaMode.BOLTZMANN_HOMOGENEOUS else ThetaMode.BOLTZMANN_INHOMOGENEOUS
    _require_theta(ctx, mode)
    g = profile.named_profile(ctx.cfg.profile, *_profile_grids(ctx.cfg))
    moments = boltzmann.BoltzmannMoments(collision, ctx.threads)
    verdict = profile.refutation_verdict(g, ctx.cfg.selfsim_params(), moments, ctx.threads)
    reports.write_json(verdict, ctx.path("refute_boltzmann.json"))
    return _verdict_code(verdict)


def refute_vpl_pipeline(ctx: RunContext) -> int:
    name = ctx.cfg.profile if "profile" in ctx.cfg.model_fields_set else "gaussian-h"
    g = profile.named_profile(name, *_profile_grids(ctx.cfg))
    if g.has_q:
        raise ConfigError(f"profile {name!r} has a y-independent part; the force needs an integrable profile")
    landau_params = ctx.cfg.landau_params().model_copy(update={"gamma": -3.0})
    verdict = vpl.vpl_refutation(g, landau=landau_params, workers=ctx.threads)
    payload: Dict[str, Any] = {"verdict": verdict}
    if g.has_h:
        payload["gauss_law"] = vpl.gauss_law(vpl.profile_density(g), radii=[0.25 * g.y_grid.extent, 0.5 * g.y_grid.extent])
    reports.write_json(payload, ctx.path("refute_vpl.json"))
    return _verdict_code(verdict)


def evolve_pipeline(ctx: RunContext) -> int:
    params = ctx.cfg.landau_params()
    f0 = _initial_density(ctx.cfg.profile).on_grid(ctx.grid)
    try:
        state, _ = evolve.run(f0, params, ctx.cfg.dt, ctx.cfg.steps, ctx.threads)
    except StabilityError as e:
        raise ConfigError(str(e)) from e
    records = state.records
    reports.write_monitor_csv(records, ctx.path("monitor.csv"))
    times = [r.time for r in records]
    reports.plot_series(times, {"entropy": [r.entropy for r in records]}, ctx.path("entropy.svg"), "t", "H")
    reports.plot_series(
        times, {"sup": [r.sup_norm for r in records], "L2": [r.l2_norm for r in records], "L3": [r.l3_norm for r in records]},
        ctx.path("norms.svg"), "t", "norm", log_y=True,
    )
    mass_drift = abs(records[-1].mass - records[0].mass) / records[0].mass
    entropy_steps = np.diff([r.entropy for r in records])
    monotone = bool(np.all(entropy_steps <= 1e-6))
    payload: Dict[str, Any] = {
        "mass_drift": mass_drift,
        "entropy_monotone": monotone,
        "clipped_mass": state.clipped_mass,
        "final_time": state.time,
    }
    if len(records) >= evolve.MIN_HISTORY:
        payload["blowup"] = evolve.blowup_indicator(records, params.gamma)
    status = VerdictStatus.PASS if monotone and mass_drift <= 1e-10 + state.clipped_mass / records[0].mass else VerdictStatus.FAIL
    payload["status"] = status
    reports.write_json(payload, ctx.path("evolve.json"))
    return STATUS_CODES[status]


def read_monitor_csv(path: Path) -> List[MonitorRecord]:
    if not path.is_file():
        raise ConfigError(f"monitor file not found: {path}")
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in reports.MONITOR_COLUMNS if c != "clipped_mass" and c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"monitor file {path} lacks columns {missing}")
        return [
            MonitorRecord(
                step=int(row["step"]),
                time=float(row["time"]),
                mass=float(row["mass"]),
                momentum=[float(row[f"momentum_{k}"]) for k in "xyz"],
                energy=float(row["energy"]),
                entropy=float(row["entropy"]),
                sup_norm=float(row["sup_norm"]),
                l2_norm=float(row["l2_norm"]),
                l3_norm=float(row["l3_norm"]),
                clipped_mass=float(row.get("clipped_mass") or 0.0),
            )
            for row in reader
        ]


def blowup_fit_pipeline(ctx: RunContext) -> int:
    if ctx.cfg.input:
        records = read_monitor_csv(Path(ctx.cfg.input))
    else:
        records = evolve.manufactured_history(ctx.cfg.theta, ctx.cfg.gamma)
    report = evolve.blowup_indicator(records, ctx.cfg.gamma)
    reports.write_json(report, ctx.path("blowup.json"))
    return EXIT_INCONCLUSIVE if report.trend == BlowupTrend.INCONCLUSIVE else EXIT_PASS


def check_theta_pipeline(ctx: RunContext) -> int:
    verdict = selfsim.check_theta_admissible(ctx.cfg.selfsim_params(), ctx.cfg.mode)
    reports.write_json(verdict, ctx.path("check_theta.json"))
    typer.echo(f"theta={verdict.theta} {'admissible' if verdict.admissible else 'rejected'} for {verdict.mode.value}")
    for violation in verdict.violations:
        typer.echo(f"  violated: {violation}")
    return EXIT_PASS if verdict.admissible else EXIT_FAIL


def _run(pipeline: Callable[[RunContext], int], **options: Any) -> int:
    ctx = _context(**options)
    logger.info(f"Running {pipeline.__name__} with n={ctx.cfg.n}, extent={ctx.cfg.extent}, out={ctx.out_dir}")
    code = pipeline(ctx)
    logger.info(f"{pipeline.__name__} finished with exit code {code}")
    return code


@app.command()
def coeffs(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    profile_name: ProfileOpt = None,
) -> int:
    """Compare the grid coefficients a and c with closed forms."""
    return _run(coeffs_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, profile=profile_name)


@app.command()
def qlandau(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    profile_name: ProfileOpt = None,
) -> int:
    """Evaluate the Landau operator, its moments and the entropy dissipation."""
    return _run(qlandau_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, profile=profile_name)


@app.command("bounds")
def bounds_command(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    bound: Annotated[Optional[str], typer.Option("--bound", help="a1hi, aloinf, agrad or c")] = None,
    exponent: Annotated[Optional[float], typer.Option("--exponent", help="p, or q for aloinf")] = None,
    samples: Annotated[Optional[int], typer.Option("--samples")] = None,
) -> int:
    """Sweep one interpolation bound over random fields."""
    return _run(bounds_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, bound=bound, exponent=exponent, samples=samples)


@app.command("selfsim-errors")
def selfsim_errors(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    theta: ThetaOpt = None, beta: Annotated[Optional[float], typer.Option("--beta")] = None,
) -> int:
    """Fit the decay of the self-similar error terms as t -> 0."""
    return _run(selfsim_errors_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, theta=theta, beta=beta)


@app.command("refute-landau")
def refute_landau(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    theta: ThetaOpt = None, profile_name: ProfileOpt = None, mode: ModeOpt = None,
) -> int:
    """Run the moment refutation of a trial Landau profile."""
    return _run(refute_landau_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, theta=theta, profile=profile_name, mode=mode)


@app.command("refute-boltzmann")
def refute_boltzmann(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    theta: ThetaOpt = None, s_exp: SOpt = None, profile_name: ProfileOpt = None, mode: ModeOpt = None,
) -> int:
    """Run the moment refutation with the non-cutoff Boltzmann operator."""
    return _run(refute_boltzmann_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, theta=theta, s_exp=s_exp, profile=profile_name, mode=mode)


@app.command("refute-vpl")
def refute_vpl(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, profile_name: ProfileOpt = None,
) -> int:
    """Run the entropy-weighted refutation of a trial VPL profile."""
    return _run(refute_vpl_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, profile=profile_name)


@app.command("evolve")
def evolve_command(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, n: NOpt = None, extent: ExtentOpt = None, gamma: GammaOpt = None,
    profile_name: ProfileOpt = None,
    steps: Annotated[Optional[int], typer.Option("--steps")] = None,
    dt: Annotated[Optional[float], typer.Option("--dt")] = None,
) -> int:
    """Integrate the homogeneous Landau equation and record monitors."""
    return _run(evolve_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                n=n, extent=extent, gamma=gamma, profile=profile_name, steps=steps, dt=dt)


@app.command("blowup-fit")
def blowup_fit(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, gamma: GammaOpt = None, theta: ThetaOpt = None,
    input_path: Annotated[Optional[str], typer.Option("--input", help="Monitor CSV; default is a manufactured history")] = None,
) -> int:
    """Fit Type I blow-up rates to a monitor history."""
    return _run(blowup_fit_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                gamma=gamma, theta=theta, input=input_path)


@app.command("check-theta")
def check_theta(
    config: ConfigOpt = None, out: OutOpt = None, threads: ThreadsOpt = None, seed: SeedOpt = None,
    log_format: LogFormatOpt = None, gamma: GammaOpt = None, theta: ThetaOpt = None, s_exp: SOpt = None,
    mode: ModeOpt = None,
) -> int:
    """Check theta against the constraints of a setting."""
    return _run(check_theta_pipeline, config=config, out=out, threads=threads, seed=seed, log_format=log_format,
                gamma=gamma, theta=theta, s_exp=s_exp, mode=mode)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point returning the process exit code."""
    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="kinetic-selfsim", standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except (ConfigError, ParameterError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        typer.echo(f"error: {e}", err=True)
        return EXIT_USAGE
    except KineticError as e:
        logger.error(f"Run failed: {e}")
        typer.echo(f"error: {e}", err=True)
        return EXIT_FAIL
    return int(result or 0)
