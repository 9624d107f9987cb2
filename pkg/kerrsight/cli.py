"""
CLI interface for kerrsight - Kerr scattering simulation and shape reconstruction
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from kerrsight.core.config import RunConfig, load_config
from kerrsight.core.errors import (
    EXIT_CODES,
    ErrorType,
    InvalidParameterError,
    NoContractionError,
)
from kerrsight.core.forward import far_field, validate_contrast
from kerrsight.core.geometry import Disk
from kerrsight.core.ls_kernel import LinearSolveConfig
from kerrsight.core.harness import CheckHarness, default_cases
from kerrsight.core.oracles import disk_refinement_study
from kerrsight.core.output import (
    write_convergence_csv,
    write_far_field_csv,
    write_field_csv,
    write_indicator_csv,
    write_pgm,
)
from kerrsight.core.reconstruction import (
    ShiftSet,
    build_candidate_bank,
    indicator_map,
    shift_points,
)
from kerrsight.core.tracer import RunTracer, StepType, classify_error

console = Console()
log = logging.getLogger("kerrsight")

RUN_LOG = "run_log.jsonl"
MIN_SUCCESS_FRACTION = 0.9


def _setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=verbose)],
        force=True,
    )


class CommandRun:
    """
    Wraps one command: starts a tracer run, maps exceptions onto exit codes,
    and writes the JSON-lines run log into the output directory on the way out.
    """

    def __init__(self, command: str, out_dir: Optional[Path] = None, metadata: Optional[Dict[str, Any]] = None):
        self.tracer = RunTracer()
        self.command = command
        self.out_dir = out_dir
        self.metadata = metadata or {}
        self.status = "success"
        self.exit_code = 0

    def __enter__(self) -> "CommandRun":
        self.tracer.start_run(self.command, self.metadata)
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, click.exceptions.Exit):
            return False
        if exc is None:
            self.tracer.end_run(self.status)
        else:
            self.tracer.end_run("failed", exc)
            self.exit_code = EXIT_CODES[classify_error(exc)]
            _display_error(exc)
            if classify_error(exc) is ErrorType.UNKNOWN_ERROR:
                log.error("unexpected failure", exc_info=(exc_type, exc, tb))
        if self.out_dir is not None:
            path = self.tracer.write_jsonl(self.out_dir / RUN_LOG)
            log.debug("run log written to %s", path)
        if self.exit_code:
            raise click.exceptions.Exit(self.exit_code)
        return exc is not None


def _load(config_path: str, threads: Optional[int], seed: Optional[int]) -> RunConfig:
    cfg = load_config(config_path)
    updates = {}
    if threads is not None:
        updates["threads"] = threads
    if seed is not None:
        updates["seed"] = seed
    if updates:
        cfg.run = cfg.run.model_copy(update=updates)
    if cfg.run.threads < 1:
        raise InvalidParameterError(f"thread count must be >= 1, got {cfg.run.threads}")
    return cfg


def _out_dir(cfg: RunConfig, out: Optional[str]) -> Path:
    path = Path(out) if out else Path(cfg.run.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def config_option(f):
    return click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                        help='TOML run configuration')(f)


def out_option(f):
    return click.option('--out', envvar='KERRSIGHT_OUT', help='Output directory (overrides [run].output_dir)')(f)


def threads_option(f):
    return click.option('--threads', envvar='KERRSIGHT_THREADS', type=int, help='Worker threads')(f)


def seed_option(f):
    return click.option('--seed', envvar='KERRSIGHT_SEED', type=int, help='Random seed')(f)


@click.group()
@click.option('--verbose', is_flag=True, help='Debug-level logging')
def cli(verbose):
    """kerrsight - Scattering and shape reconstruction for Kerr-type media"""
    load_dotenv()
    _setup_logging(verbose)


@cli.command()
@config_option
@threads_option
@seed_option
def validate(config_path, threads, seed):
    """Parse a configuration and report the scene it describes"""
    with CommandRun("validate", metadata={"config": config_path}) as run:
        cfg = _load(config_path, threads, seed)
        scene = cfg.build_scene()
        cfg.optimizer()
        diagnostics = validate_contrast(scene.contrast, seed=cfg.run.seed)
        run.tracer.log_step(StepType.ACCEPTANCE_CHECK, output_data=diagnostics.to_dict())
        _display_scene(cfg, scene, diagnostics)
        console.print("[green]Configuration is valid.[/green]")


@cli.command()
@config_option
@out_option
@threads_option
@seed_option
@click.option('--direction', type=float, help='Plane wave direction angle in radians')
@click.option('--density', type=click.Path(dir_okay=False), help='Herglotz density CSV (n, Re, Im)')
def forward(config_path, out, threads, seed, direction, density):
    """Solve the forward problem for one incident field"""
    cfg = _safe_load(config_path, threads, seed)
    out_dir = _out_dir(cfg, out)
    with CommandRun("forward", out_dir, {"config": config_path}) as run:
        if direction is not None and density is not None:
            raise InvalidParameterError("give either --direction or --density, not both")
        scene = cfg.build_scene()
        ui = cfg.build_incident(scene, density=density, direction=direction)
        try:
            result = scene.forward(ui, tracer=run.tracer)
        except NoContractionError as exc:
            write_convergence_csv(out_dir / "convergence.csv", exc.increment_history)
            raise
        tau = cfg.tau
        write_field_csv(out_dir / "u0s.csv", scene.grid, tau * result.u0s)
        write_field_csv(out_dir / "w.csv", scene.grid, tau * result.w)
        write_field_csv(out_dir / "total.csv", scene.grid, tau * result.total(ui))
        write_convergence_csv(out_dir / "convergence.csv", result.increment_history)
        console.print(Panel(
            f"[bold]Sweeps:[/bold] {result.iterations_used}\n"
            f"[bold]Final increment:[/bold] {result.increment_history[-1]:.3e}\n"
            f"[bold]max |u0s|:[/bold] {tau * np.abs(result.u0s).max():.6g}\n"
            f"[bold]max |w|:[/bold] {tau * np.abs(result.w).max():.6g}\n"
            f"[bold]Output:[/bold] {out_dir}",
            title="[green]Forward solve[/green]",
            border_style="green",
        ))


@cli.command()
@config_option
@out_option
@threads_option
@seed_option
@click.option('--density', type=click.Path(dir_okay=False), help='Herglotz density CSV (n, Re, Im)')
def farfield(config_path, out, threads, seed, density):
    """Evaluate the far field pattern F(g) for a density"""
    cfg = _safe_load(config_path, threads, seed)
    out_dir = _out_dir(cfg, out)
    with CommandRun("farfield", out_dir, {"config": config_path}) as run:
        source = density if density is not None else cfg.incident.density
        if source is None:
            raise InvalidParameterError("farfield needs a density: pass --density or set [incident].density")
        scene = cfg.build_scene()
        g = cfg.read_density(source)
        if g.norm > scene.rho * (1 + 1e-12):
            raise InvalidParameterError(f"density norm {g.norm * cfg.tau:.6g} exceeds rho = {cfg.reconstruction.rho:g}")
        ui = scene.incident(g)
        result = scene.forward(ui, tracer=run.tracer)
        pattern = far_field(scene.kernel, scene.contrast, ui, result.u0s, result.w,
                            scene.quadrature, basis=scene.basis)
        path = write_far_field_csv(out_dir / "farfield.csv", pattern.angles, cfg.tau * pattern.samples)
        console.print(Panel(
            f"[bold]Nodes:[/bold] {pattern.M}\n"
            f"[bold]Sweeps:[/bold] {result.iterations_used}\n"
            f"[bold]max |u_inf|:[/bold] {cfg.tau * np.abs(pattern.samples).max():.6g}\n"
            f"[bold]Output:[/bold] {path}",
            title="[green]Far field[/green]",
            border_style="green",
        ))


@cli.command()
@config_option
@out_option
@threads_option
@seed_option
def reconstruct(config_path, out, threads, seed):
    """Compute the indicator maps on the sampling grid"""
    cfg = _safe_load(config_path, threads, seed)
    out_dir = _out_dir(cfg, out)
    with CommandRun("reconstruct", out_dir, {"config": config_path, "threads": cfg.run.threads}) as run:
        scene = cfg.build_scene()
        optimizer = cfg.optimizer()
        sampling = scene.grid
        stride = cfg.reconstruction.shift_stride
        bank = None
        if cfg.shift_set is ShiftSet.GRID:
            # numerators depend on the density only, so both objectives share one bank
            bank = build_candidate_bank(scene, shift_points(sampling, stride),
                                        threads=cfg.run.threads, tracer=run.tracer)
        maps = []
        for kind in cfg.objective_kinds():
            result = indicator_map(kind, sampling, scene, optimizer, shifts=cfg.shift_set,
                                   shift_stride=stride, threads=cfg.run.threads, bank=bank,
                                   tracer=run.tracer)
            maps.append(result)
            evals = result.evals
            for label, values in (("initial", result.initial), ("optimized", result.values)):
                stem = f"indicator_{kind.value}_{label}"
                write_indicator_csv(out_dir / f"{stem}.csv", sampling, values, evals, result.status)
                write_pgm(out_dir / f"{stem}.pgm", values)
        _display_maps(maps)
        fraction = min(m.success_fraction() for m in maps)
        if fraction < MIN_SUCCESS_FRACTION:
            run.status = "partial"
            run.exit_code = EXIT_CODES[ErrorType.SOLVER_ERROR]
            console.print(f"[red]Only {fraction:.1%} of sampling points succeeded.[/red]")


@cli.command('oracle-disk')
@config_option
@out_option
def oracle_disk(config_path, out):
    """Compare the linear grid solver with the disk transmission series"""
    out_dir = Path(out) if out else None
    with CommandRun("oracle-disk", out_dir, {"config": config_path}) as run:
        cfg = load_config(config_path)
        lin = LinearSolveConfig(cfg.linear_solver.tolerance, cfg.linear_solver.max_iterations,
                                cfg.linear_solver.restart)
        k, disk, q0 = _disk_scene(cfg)
        with run.tracer.timed(StepType.ACCEPTANCE_CHECK, check="disk_oracle") as step:
            study = disk_refinement_study(k, q0, disk.radius, cfg.grid.R, cfg.grid.J,
                                          direction=cfg.incident.direction, center=disk.center,
                                          lin=lin)
            step.output_data = study.to_dict()
        table = Table(title="Disk oracle (relative sup error of u0s)")
        table.add_column("h", style="cyan")
        table.add_column("error", style="white")
        table.add_row(f"{study.h:g}", f"{study.error_h:.3e}")
        table.add_row(f"{study.h / 2:g}", f"{study.error_h_half:.3e}")
        console.print(table)
        console.print(f"[bold]Convergence factor:[/bold] {study.ratio:.3f}")


@cli.command()
@click.option('--cases', 'cases_file', type=click.Path(dir_okay=False), help='JSON file with check cases')
@click.option('--save-results', help='Save results to JSON file')
@click.option('--out', envvar='KERRSIGHT_OUT', help='Directory for the run log')
def check(cases_file, save_results, out):
    """Run the acceptance checks"""
    out_dir = Path(out) if out else None
    with CommandRun("check", out_dir) as run:
        harness = CheckHarness(run.tracer)
        if cases_file:
            harness.load_cases(cases_file)
            console.print(f"[green]Loaded check cases from {cases_file}[/green]")
        else:
            for case in default_cases():
                harness.add_case(case)
            console.print("[green]Using default check cases[/green]")
        results = harness.run_all()
        _display_check_results(harness, results)
        if save_results:
            harness.save_results(save_results)
            console.print(f"\n[green]Results saved to {save_results}[/green]")
        summary = harness.get_summary()
        if summary["passed"] < summary["total_checks"]:
            run.status = "failed"
            run.exit_code = 1


def _safe_load(config_path, threads, seed) -> RunConfig:
    """Load before an output directory exists; errors still map to exit codes"""
    with CommandRun("load", metadata={"config": config_path}):
        return _load(config_path, threads, seed)


def _disk_scene(cfg: RunConfig):
    linear = [t for t in cfg.contrast.terms if t.exponent == 0]
    if len(linear) != 1 or linear[0].value is None or linear[0].shape is None:
        raise InvalidParameterError("oracle-disk needs one constant q0 term on a disk")
    shape = linear[0].shape.build()
    if not isinstance(shape, Disk):
        raise InvalidParameterError(f"oracle-disk needs a disk, got {linear[0].shape.kind}")
    if len(cfg.contrast.terms) > 1:
        log.info("oracle-disk ignores the %d nonlinear term(s)", len(cfg.contrast.terms) - 1)
    return cfg.scene.wavenumber, shape, linear[0].value


def _display_scene(cfg: RunConfig, scene, diagnostics):
    grid = scene.grid
    exponents = ", ".join(f"{a:g}" for a in diagnostics.exponents)
    text = f"""
[bold]Wavenumber:[/bold] {scene.k:g}
[bold]Grid:[/bold] R = {grid.R:g}, J = {grid.J}, h = {grid.h:g}, {grid.n}x{grid.n} points
[bold]FFT size:[/bold] {scene.kernel.fft_size}x{scene.kernel.fft_size}
[bold]Support points:[/bold] {int(scene.contrast.support.sum())}
[bold]Exponents:[/bold] {exponents}
[bold]essinf(1 + q0):[/bold] {diagnostics.essinf_one_plus_q0:.6g}
[bold]Empirical C_q:[/bold] {diagnostics.c_q:.6g} (sum of Kerr coefficient bounds {diagnostics.coefficient_bound:.6g})
[bold]Quadrature:[/bold] M = {scene.quadrature.M}, N = {scene.N}
[bold]rho:[/bold] {scene.rho:g} (rescaled, tau = {cfg.tau:g})
"""
    console.print(Panel(text.strip(), title="[cyan]Scene[/cyan]", border_style="cyan"))


def _display_maps(maps: List):
    table = Table(title="Indicator maps")
    table.add_column("Objective", style="cyan")
    table.add_column("Success", style="green")
    table.add_column("min I", style="white")
    table.add_column("max I", style="white")
    table.add_column("mean evals", style="blue")
    for m in maps:
        finite = m.values[np.isfinite(m.values)]
        table.add_row(
            m.kind.value,
            f"{m.success_fraction():.1%}",
            f"{finite.min():.3e}" if finite.size else "-",
            f"{finite.max():.3e}" if finite.size else "-",
            f"{m.evals[m.ok].mean():.1f}" if m.ok.any() else "-",
        )
    console.print(table)


def _display_check_results(harness: CheckHarness, results):
    table = Table(title="Acceptance checks")
    table.add_column("Case", style="cyan")
    table.add_column("Status", style="white")
    table.add_column("Duration", style="blue")
    table.add_column("Reason", style="red")
    for result in results:
        style = "green" if result.status == "passed" else "red"
        table.add_row(result.case_id, f"[{style}]{result.status}[/{style}]",
                      f"{(result.duration_ms or 0) / 1000:.1f}s", result.failure_reason or "-")
    console.print(table)

    summary = harness.get_summary()
    pass_rate = summary['pass_rate']
    rate_color = "green" if pass_rate == 1 else "yellow" if pass_rate >= 0.7 else "red"
    summary_text = f"""
[bold]Total Checks:[/bold] {summary['total_checks']}
[bold]Passed:[/bold] [green]{summary['passed']}[/green]
[bold]Failed:[/bold] [red]{summary['failed']}[/red]
[bold]Errors:[/bold] [red]{summary['errors']}[/red]
[bold]Pass Rate:[/bold] [{rate_color}]{pass_rate:.1%}[/{rate_color}]
[bold]Average Duration:[/bold] {summary['avg_duration_ms']:.1f}ms
"""
    console.print(Panel(summary_text.strip(), title="[cyan]Check Summary[/cyan]", border_style="cyan"))


def _display_error(error: BaseException):
    text = f"[bold]Error Type:[/bold] {classify_error(error).value}\n[bold]Message:[/bold] {error}"
    history = getattr(error, "increment_history", None)
    if history:
        tail = ", ".join(f"{x:.3e}" for x in history[-8:])
        text += f"\n[bold]Increment history[/bold] ({len(history)} sweeps): ... {tail}"
    console.print(Panel(text, title="[red]Error Details[/red]", border_style="red"))


if __name__ == "__main__":
    cli()
