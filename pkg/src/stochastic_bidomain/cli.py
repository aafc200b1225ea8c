from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
import typer
from rich.console import Console

from stochastic_bidomain.bidomain_op import BidomainOperator
from stochastic_bidomain.config import ConfigError, RunConfig, output_root, parse_config
from stochastic_bidomain.experiments import (
    ExperimentReport,
    SimInputs,
    invariant_support,
    small_noise_deviation,
    stationary_convergence,
    stationary_coupling,
    tail_probability,
)
from stochastic_bidomain.ionic import check_model, fit_condition_c3
from stochastic_bidomain.manifest import (
    RunManifest,
    RunPaths,
    dumps_json,
    operator_fingerprint,
    read_manifest,
    write_csv_atomic,
    write_json_atomic,
)
from stochastic_bidomain.noise import check_summability
from stochastic_bidomain.quality import ledger_checks
from stochastic_bidomain.sim import BlowUpError, simulate

app = typer.Typer(add_completion=False, help="Stochastic bidomain simulator and bound checks.")
experiment_app = typer.Typer(add_completion=False, help="Monte-Carlo bound checks.")
app.add_typer(experiment_app, name="experiment")

console = Console(stderr=True)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATED = 2
EXIT_INCONCLUSIVE = 3

VERDICT_EXIT = {
    "within_bound": EXIT_OK,
    "violated_beyond_CI": EXIT_VIOLATED,
    "inconclusive": EXIT_INCONCLUSIVE,
}

EXPERIMENTS = ("small-noise", "tail", "stationary", "support", "convergence")


@dataclass
class Outcome:
    report: dict[str, object]
    exit_code: int
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)


# ---------------------------------------------------------------------
# Command bodies (config + operator -> outcome)
# ---------------------------------------------------------------------


def _operator_info(cfg: RunConfig, op: BidomainOperator, flags: list[str]) -> Outcome:
    n_eig = next((int(f.split("=", 1)[1]) for f in flags if f.startswith("--eigenvalues=")), None)
    report: dict[str, object] = {"command": "operator-info", "operator": op.to_dict(n_eig)}
    if "--noise" in flags:
        spectrum = cfg.build_spectrum(op)
        report["noise"] = spectrum.to_dict()
        report["summability"] = check_summability(spectrum, op).to_dict()
    return Outcome(report, EXIT_OK)


def _check_model(cfg: RunConfig, op: BidomainOperator, flags: list[str]) -> Outcome:
    result = check_model(cfg.build_model(), cfg.sample_box(), op.alpha, op.poincare_cp)
    cc = result.coefficient_condition
    ok = result.certified and (cc is None or cc.satisfied)
    report = {"command": "check-model", "constants": op.constants._asdict(), **result.to_dict()}
    return Outcome(report, EXIT_OK if ok else EXIT_VIOLATED)


def _simulate(cfg: RunConfig, op: BidomainOperator, flags: list[str]) -> Outcome:
    grid = op.grid
    model = cfg.build_model()
    c3 = fit_condition_c3(model, cfg.sample_box())
    sim_cfg = cfg.build_sim_config(grid)
    sim_cfg.check_stability(op)
    report: dict[str, object] = {
        "command": "simulate",
        "seed": cfg.experiment.seed,
        "sim": sim_cfg.to_dict(),
        "c3_constants": {"a": c3.a, "b": c3.b, "c": c3.c},
    }
    try:
        rec = simulate(
            cfg.build_initial(grid), sim_cfg, op, model, cfg.build_spectrum(op),
            seed=cfg.experiment.seed, c3=c3, keep_states=False,
        )
    except BlowUpError as err:
        console.print(f"[red]{err}[/red]")
        report["blow_up"] = {
            "time": err.time,
            "last_row": err.last_row,
            "first_bad_row": err.first_bad,
        }
        return Outcome(report, EXIT_ERROR, {"ledger": ledger_checks(err.ledger)})

    ledger = rec.ledger
    energy = ledger["norm_u_H2"] + ledger["norm_w_H2"]
    report.update(
        {
            "final_time": float(rec.final.t),
            "records": len(ledger),
            "sup_energy": float(energy.max()),
            "min_c3_residual": float(ledger["c3_residual"].min()),
        }
    )
    return Outcome(report, EXIT_OK, {"ledger": ledger})


def _experiment_outcome(report: ExperimentReport) -> Outcome:
    for line in report.diagnostics:
        console.print(f"[yellow]{line}[/yellow]")
    return Outcome(
        {"command": f"experiment {report.experiment}", **report.to_dict()},
        VERDICT_EXIT[report.verdict],
        {"replicas": report.replicas},
    )


def _experiment(name: str) -> Callable[[RunConfig, BidomainOperator, list[str]], Outcome]:
    def body(cfg: RunConfig, op: BidomainOperator, flags: list[str]) -> Outcome:
        grid = op.grid
        model = cfg.build_model()
        inputs = SimInputs(
            initial=cfg.build_initial(grid),
            config=cfg.build_sim_config(grid),
            operator=op,
            model=model,
            spectrum=cfg.build_spectrum(op),
            c3=fit_condition_c3(model, cfg.sample_box()),
        )
        inputs.config.check_stability(op)
        mc = cfg.mc_config(progress="--progress" in flags)
        e = cfg.experiment
        if name == "small-noise":
            report = small_noise_deviation(e.epsilons, inputs, mc)
        elif name == "tail":
            report = tail_probability(e.r, e.epsilon, cfg.sim.T, inputs, mc)
        elif name == "stationary":
            report = stationary_coupling(
                e.eps1, e.eps2, e.burn_in, e.horizon, inputs, mc, e.stationarity_hypotheses
            )
        elif name == "convergence":
            report = stationary_convergence(
                e.epsilons, e.burn_in, e.horizon, inputs, mc, e.stationarity_hypotheses
            )
        else:
            report = invariant_support(inputs, e.horizons, mc)
        return _experiment_outcome(report)

    return body


def _body(command: list[str]) -> Callable[[RunConfig, BidomainOperator, list[str]], Outcome]:
    head = command[0] if command else ""
    if head == "operator-info":
        return _operator_info
    if head == "check-model":
        return _check_model
    if head == "simulate":
        return _simulate
    if head == "experiment" and len(command) > 1 and command[1] in EXPERIMENTS:
        return _experiment(command[1])
    raise ValueError(f"Unknown command in manifest: {command}")


# ---------------------------------------------------------------------
# Run orchestration
# ---------------------------------------------------------------------


def _fail(message: str) -> typer.Exit:
    typer.secho(message, fg=typer.colors.RED, err=True)
    return typer.Exit(code=EXIT_ERROR)


def _load(
    config: Path,
    seed: int | None,
    replicas: int | None,
    threads: int | None,
) -> RunConfig:
    try:
        return parse_config(config).with_overrides(seed=seed, replicas=replicas, threads=threads)
    except (ConfigError, FileNotFoundError) as exc:
        raise _fail(f"Config error: {exc}") from None


def execute(
    command: list[str],
    cfg: RunConfig,
    out_dir: Path | None,
    flags: list[str] | None = None,
    expected_fingerprint: str | None = None,
) -> int:
    """Build the operator, write the manifest, run the command, write outputs, finalize."""
    flags = list(flags or [])
    console.print(f"[cyan]{' '.join(command)}: building operator...[/cyan]")
    op = cfg.build_operator()
    fingerprint = operator_fingerprint(op, cfg.echo()["conductivity"])
    if expected_fingerprint is not None and expected_fingerprint != fingerprint:
        console.print("[yellow]operator fingerprint differs from the manifest[/yellow]")

    paths = RunPaths.create(output_root(out_dir), cfg.experiment.seed)
    manifest = RunManifest(
        command=[*command, *flags],
        config=cfg.echo(),
        seed=cfg.experiment.seed,
        fingerprint=fingerprint,
    )
    manifest.write(paths)

    outcome = _body(command)(cfg, op, flags)

    written = [write_json_atomic(paths.report_path, outcome.report)]
    for name, table in outcome.tables.items():
        target = paths.ledger_path if name == "ledger" else paths.replicas_path
        written.append(write_csv_atomic(target, table))
    manifest.finalize(paths, written, outcome.exit_code)

    typer.echo(dumps_json(outcome.report), nl=False)
    console.print(f"[bold green]Wrote:[/bold green] {paths.run_dir}")
    return outcome.exit_code


def _run(
    command: list[str],
    config: Path,
    out_dir: Path | None,
    seed: int | None = None,
    replicas: int | None = None,
    threads: int | None = None,
    flags: list[str] | None = None,
) -> None:
    cfg = _load(config, seed, replicas, threads)
    try:
        code = execute(command, cfg, out_dir, flags)
    except (ConfigError, ValueError, FileNotFoundError, BlowUpError) as exc:
        raise _fail(f"Error: {exc}") from None
    raise typer.Exit(code=code)


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------

CONFIG_ARG = typer.Argument(..., help="TOML run configuration")
OUT_DIR = typer.Option(
    None,
    "--out-dir",
    help="Output root (else SBIDOMAIN_OUTPUT_DIR, else ./runs)",
    show_default=False,
)
SEED = typer.Option(None, "--seed", help="Override experiment.seed", show_default=False)
REPLICAS = typer.Option(None, "--replicas", help="Override experiment.replicas", show_default=False)
THREADS = typer.Option(None, "--threads", help="Override experiment.threads", show_default=False)
PROGRESS = typer.Option(False, "--progress", help="Show a replica progress bar on stderr")


@app.command("operator-info")
def operator_info(
    config: Path = CONFIG_ARG,
    noise: bool = typer.Option(False, "--noise", help="Include noise spectrum and summability"),
    eigenvalues: int | None = typer.Option(
        None, "--eigenvalues", help="Number of eigenvalues to list (default all)",
        show_default=False,
    ),
    out_dir: Path | None = OUT_DIR,
):
    """Dump eigenvalues and the constants alpha, M, C_p as JSON."""
    flags = ["--noise"] if noise else []
    if eigenvalues:
        flags.append(f"--eigenvalues={eigenvalues}")
    _run(["operator-info"], config, out_dir, flags=flags)


@app.command("check-model")
def check_model_cmd(
    config: Path = CONFIG_ARG,
    out_dir: Path | None = OUT_DIR,
):
    """Certify the structural and coefficient conditions of the ionic model."""
    _run(["check-model"], config, out_dir)


@app.command("simulate")
def simulate_cmd(
    config: Path = CONFIG_ARG,
    seed: int | None = SEED,
    out_dir: Path | None = OUT_DIR,
):
    """Integrate one trajectory and write its energy ledger as CSV."""
    _run(["simulate"], config, out_dir, seed=seed)


def _experiment_command(name: str, doc: str) -> None:
    def command(
        config: Path = CONFIG_ARG,
        seed: int | None = SEED,
        replicas: int | None = REPLICAS,
        threads: int | None = THREADS,
        progress: bool = PROGRESS,
        out_dir: Path | None = OUT_DIR,
    ):
        _run(
            ["experiment", name], config, out_dir, seed, replicas, threads,
            flags=["--progress"] if progress else [],
        )

    command.__doc__ = doc
    experiment_app.command(name)(command)


_experiment_command(
    "small-noise", "E sup of the squared deviation from the deterministic run per epsilon."
)
_experiment_command("tail", "Empirical tail frequency against 3 exp(-r^2 / (4 gamma eps^2 T)).")
_experiment_command("stationary", "Stationary coupled difference against (eps1 - eps2)^2 gamma.")
_experiment_command("support", "Time averages of ||u||_V^2 + ||w||_H^2 across horizons.")
_experiment_command(
    "convergence", "Stationary distance to the deterministic solution per epsilon."
)


@app.command("rerun")
def rerun(
    manifest: Path = typer.Argument(..., help="manifest.json or its run directory"),
    out_dir: Path | None = OUT_DIR,
):
    """Re-execute a recorded run from its manifest alone."""
    try:
        recorded = read_manifest(manifest)
        cfg = RunConfig.from_mapping(recorded.config)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        raise _fail(f"Manifest error: {exc}") from None

    command = [c for c in recorded.command if not c.startswith("--")]
    flags = [c for c in recorded.command if c.startswith("--")]
    try:
        code = execute(command, cfg, out_dir, flags, expected_fingerprint=recorded.fingerprint)
    except (ConfigError, ValueError, FileNotFoundError, BlowUpError) as exc:
        raise _fail(f"Error: {exc}") from None
    raise typer.Exit(code=code)


if __name__ == "__main__":
    app()
