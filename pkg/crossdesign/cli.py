"""Command line interface for crossdesign"""
import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Dict, List, Optional

import click
import pandas as pd

from crossdesign import __version__
from crossdesign.config import CrossDesignConfig
from crossdesign.core.io import load_sample, write_sample
from crossdesign.core.validation import validate_sample
from crossdesign.estimators.registry import EstimationPlan, default_registry, run_plan
from crossdesign.estimators.sensitivity import SensitivitySpec, sensitivity_bounds
from crossdesign.exceptions import CrossDesignError, ScenarioError, UsageError
from crossdesign.inference.bootstrap import bootstrap_ci
from crossdesign.inference.influence import eif_inference
from crossdesign.inference.results import POINT_ONLY, InferenceResult, Interval, write_results
from crossdesign.learners.logistic import SELECTION, fit_binary_propensity
from crossdesign.learners.specs import spec_from_token
from crossdesign.log.structured import StructuredLogger, configure_logging
from crossdesign.monitoring.metrics import MetricsTracker
from crossdesign.monitoring.performance import PerformanceMonitor
from crossdesign.overlap.region import REFERENCE_GRID, OverlapParams, assign_overlap
from crossdesign.simulation.population import draw_sample, generate_population, true_estimands
from crossdesign.simulation.runner import run_scenario
from crossdesign.simulation.scenarios import ScenarioConfig, load_scenario, scenario_from_dict
from crossdesign.workflow.iteration_status import IterationStatusTracker

logger = logging.getLogger(__name__)

CSV_OPTIONS = dict(index=False, float_format='%.17g', lineterminator='\n')


def reports_errors(func):
    """Turn library errors into a one-line diagnostic and a nonzero exit"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CrossDesignError as e:
            click.echo(f"error: {e.message}", err=True)
            sys.exit(1)
    return wrapper


def _csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, **CSV_OPTIONS)
    return path


def _json(data: Dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    return path


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [v.strip() for v in value.split(',') if v.strip()]


def _out_dir(ctx: click.Context, out: Optional[str]) -> Path:
    return Path(out or ctx.obj.OUTPUT_DIR)


def _scenario(scenario: Optional[str], manifest: Optional[str]) -> ScenarioConfig:
    if scenario and manifest:
        raise UsageError("give either --scenario or --manifest, not both")
    if manifest:
        try:
            with open(manifest, encoding='utf-8') as f:
                recorded = json.load(f)
        except (OSError, ValueError) as e:
            raise ScenarioError(f"cannot read manifest {manifest}: {e}")
        if 'config' not in recorded:
            raise ScenarioError(f"manifest {manifest} holds no config")
        return scenario_from_dict(recorded['config'])
    if scenario:
        return load_scenario(scenario)
    return ScenarioConfig()


@click.group()
@click.version_option(__version__, prog_name='crossdesign')
@click.option('--log-level', default=None, help='Overrides CCDS_LOG_LEVEL')
@click.option('--log-format', type=click.Choice(['json', 'console']), default=None,
              help='Overrides CCDS_LOG_FORMAT')
@click.pass_context
@reports_errors
def cli(ctx: click.Context, log_level: Optional[str], log_format: Optional[str]):
    """Cross-design synthesis estimators for randomized plus observational data"""
    config = CrossDesignConfig()
    if log_level:
        config.LOG_LEVEL = log_level.upper()
    if log_format:
        config.LOG_FORMAT = log_format
    config.validate()
    configure_logging(config.LOG_LEVEL, config.LOG_FORMAT)
    ctx.obj = config


@cli.command()
@click.option('--scenario', type=click.Path(exists=True, dir_okay=False), help='Scenario file')
@click.option('--manifest', type=click.Path(exists=True, dir_okay=False),
              help='Replay the effective config recorded by an earlier run')
@click.option('--iters', type=int, default=None, help='Simulation iterations')
@click.option('--bootstrap', type=int, default=None, help='Bootstrap replications (0 disables)')
@click.option('--level', type=float, default=None)
@click.option('--k', 'multiplicity', type=int, default=None, help='Bonferroni multiplicity')
@click.option('--n', type=int, default=None, help='Sample size per iteration')
@click.option('--population-size', type=int, default=None)
@click.option('--estimators', default=None, help='Comma-separated estimator names')
@click.option('--outcome-spec', default=None)
@click.option('--propensity-spec', default=None)
@click.option('--selection-spec', default=None)
@click.option('--g-spec', default=None)
@click.option('--overlap', type=click.Choice(['estimated', 'oracle']), default=None)
@click.option('--seed', type=int, default=None)
@click.option('--threads', type=int, default=None)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_context
@reports_errors
def simulate(ctx, scenario, manifest, iters, bootstrap, level, multiplicity, n, population_size,
             estimators, outcome_spec, propensity_spec, selection_spec, g_spec, overlap,
             seed, threads, out):
    """Run a simulation scenario and write report.csv, manifest.json and metrics.json"""
    config = _scenario(scenario, manifest)
    names = _split(estimators)
    if names:
        default_registry().validate(names)
    config = config.with_overrides({
        'seed': seed,
        'population.n': n,
        'population.size': population_size,
        'fit.outcome': outcome_spec,
        'fit.propensity': propensity_spec,
        'fit.selection': selection_spec,
        'fit.g': g_spec,
        'fit.overlap': overlap,
        'run.iterations': iters,
        'run.bootstrap': bootstrap,
        'run.level': level,
        'run.multiplicity': multiplicity,
        'run.estimators': tuple(names) if names else None,
        'run.threads': threads,
    })

    metrics = MetricsTracker()
    monitor = PerformanceMonitor()
    tracker = IterationStatusTracker()
    events = StructuredLogger()
    events.set_context(command='simulate', scenario=config.name)
    events.log(logging.INFO, "simulation started", iterations=config.run.iterations,
               bootstrap=config.run.bootstrap, seed=config.seed)

    report = run_scenario(config, metrics=metrics, monitor=monitor, tracker=tracker)

    out_dir = _out_dir(ctx, out)
    report.write(out_dir / 'report.csv')
    _json({
        'version': __version__,
        'seed': config.seed,
        'config': config.manifest(),
        'unstable': report.unstable,
        'iterations': report.status,
        'performance': monitor.get_performance_report(include_timings=False),
    }, out_dir / 'manifest.json')
    metrics.save_metrics(out_dir)

    for name in report.unstable:
        click.echo(f"warning: estimator {name} flagged unstable", err=True)
    click.echo(f"Wrote {len(report.rows)} report rows to {out_dir / 'report.csv'}")


@cli.command()
@click.option('--data', required=True, type=click.Path(exists=True, dir_okay=False), help='Sample CSV')
@click.option('--estimators', default='ccds-or', show_default=True)
@click.option('--outcome-spec', default='main-terms', show_default=True)
@click.option('--propensity-spec', default='main-terms', show_default=True)
@click.option('--selection-spec', default=None, help='Defaults to the propensity spec')
@click.option('--g-spec', default=None, help='Bias function design for 2-stage estimators')
@click.option('--g-by-arm', is_flag=True, help='Treatment-specific 2-stage bias fits')
@click.option('--ridge', type=float, default=0.0, show_default=True)
@click.option('--alpha', 'alpha_fraction', type=float, default=0.01, show_default=True)
@click.option('--beta', 'beta_fraction', type=float, default=0.01, show_default=True)
@click.option('--scale', type=click.Choice(['logit', 'probability']), default='logit', show_default=True)
@click.option('--trim-floor', type=float, default=None)
@click.option('--bootstrap', type=int, default=0, show_default=True)
@click.option('--level', type=float, default=0.95, show_default=True)
@click.option('--k', 'multiplicity', type=int, default=1, show_default=True)
@click.option('--unstratified', is_flag=True)
@click.option('--freeze-overlap', is_flag=True)
@click.option('--eif', is_flag=True, help='Add influence-function intervals for ccds-aipw')
@click.option('--sensitivity', default=None, metavar='LOW:HIGH[:POINTS]',
              help='Scan a constant bias over this range')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--threads', type=int, default=None)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_context
@reports_errors
def estimate(ctx, data, estimators, outcome_spec, propensity_spec, selection_spec, g_spec, g_by_arm,
             ridge, alpha_fraction, beta_fraction, scale, trim_floor, bootstrap, level, multiplicity,
             unstratified, freeze_overlap, eif, sensitivity, seed, threads, out):
    """Estimate treatment-specific means on a sample CSV"""
    sample = load_sample(data)
    validation = validate_sample(sample)
    if not validation.ok:
        click.echo(validation.format(), err=True)
        sys.exit(1)
    for warning in validation.warnings:
        logger.warning(warning.message)

    plan = EstimationPlan(
        estimators=default_registry().validate(_split(estimators) or []),
        outcome_spec=spec_from_token(outcome_spec, ridge, seed),
        propensity_spec=spec_from_token(propensity_spec, ridge, seed),
        selection_spec=spec_from_token(selection_spec, ridge, seed) if selection_spec else None,
        g_spec=spec_from_token(g_spec, ridge, seed) if g_spec else None,
        g_by_arm=g_by_arm,
        overlap_params=OverlapParams(alpha_fraction, beta_fraction, scale),
        trim_floor=trim_floor or ctx.obj.TRIM_FLOOR,
    )
    metrics = MetricsTracker()
    point = run_plan(sample, plan)

    if bootstrap:
        results = list(bootstrap_ci(sample, plan, bootstrap, level, multiplicity, seed=seed,
                                    stratified=not unstratified, freeze_overlap=freeze_overlap,
                                    threads=threads or ctx.obj.THREADS, metrics=metrics,
                                    point=point).values())
    else:
        results = []
        for name, est in point.estimates.items():
            result = InferenceResult(name, POINT_ONLY, level, multiplicity)
            nan = float('nan')
            result.intervals = {key: Interval(value, nan, nan, nan) for key, value in est.estimands().items()}
            results.append(result)
    if eif:
        results.append(eif_inference(sample, point.nuisances, level=level, multiplicity_k=multiplicity))

    out_dir = _out_dir(ctx, out)
    write_results(results, out_dir / 'estimates.csv')
    if point.overlap.diagnostics is not None:
        _csv(pd.DataFrame([point.overlap.diagnostics.as_row(plan.overlap_params)]), out_dir / 'overlap.csv')
    if sensitivity:
        rows = []
        spec = _sensitivity_spec(sensitivity)
        for a in sample.treatment_levels:
            rows += sensitivity_bounds(sample, point.nuisances, a, spec).as_rows()
        _csv(pd.DataFrame(rows, columns=['treatment', 'beta', 'estimate']), out_dir / 'sensitivity.csv')
    metrics.save_metrics(out_dir)

    for result in results:
        for row in result.rows():
            click.echo(f"{row['estimator']:<16} {row['treatment']:<8} {row['estimate']:.6g}"
                       f"  [{row['ci_lo']:.6g}, {row['ci_hi']:.6g}]")


def _sensitivity_spec(text: str) -> SensitivitySpec:
    parts = text.split(':')
    try:
        low, high = float(parts[0]), float(parts[1])
        points = int(parts[2]) if len(parts) > 2 else 21
    except (IndexError, ValueError):
        raise UsageError(f"--sensitivity expects LOW:HIGH[:POINTS], got {text!r}")
    if points < 1:
        raise UsageError("--sensitivity needs at least one grid point")
    return SensitivitySpec.intercept_range(low, high, points)


@cli.command()
@click.option('--data', required=True, type=click.Path(exists=True, dir_okay=False), help='Sample CSV')
@click.option('--selection-spec', default='main-terms', show_default=True)
@click.option('--ridge', type=float, default=0.0, show_default=True)
@click.option('--alpha', 'alphas', type=float, multiple=True, help='Repeatable; with --beta and --scale')
@click.option('--beta', 'betas', type=float, multiple=True)
@click.option('--scale', 'scales', type=click.Choice(['logit', 'probability']), multiple=True)
@click.option('--trim-floor', type=float, default=None)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_context
@reports_errors
def overlap(ctx, data, selection_spec, ridge, alphas, betas, scales, trim_floor, out):
    """Overlap diagnostics over a grid of window and count settings.

    Without --alpha the reference grid is used; otherwise the i-th --alpha,
    --beta and --scale values form one grid point.
    """
    sample = load_sample(data)
    if alphas:
        if len(betas) != len(alphas) or len(scales) not in (0, len(alphas)):
            raise UsageError("--alpha, --beta and --scale must be given the same number of times")
        grid = [OverlapParams(a, b, scales[i] if scales else 'logit')
                for i, (a, b) in enumerate(zip(alphas, betas))]
    else:
        grid = list(REFERENCE_GRID)

    pi_s = fit_binary_propensity(sample, sample.s, spec_from_token(selection_spec, ridge),
                                 SELECTION, trim_floor or ctx.obj.TRIM_FLOOR)
    rows = [assign_overlap(sample, pi_s, params).diagnostics.as_row(params) for params in grid]
    frame = pd.DataFrame(rows)
    path = _csv(frame, _out_dir(ctx, out) / 'overlap.csv')
    click.echo(frame.to_string(index=False))
    logger.info(f"Wrote {len(rows)} overlap rows to {path}")


@cli.command()
@click.option('--scenario', type=click.Path(exists=True, dir_okay=False), help='Scenario file')
@click.option('--population-size', type=int, default=None)
@click.option('--seed', type=int, default=None)
@click.option('--sample-out', type=click.Path(dir_okay=False), default=None,
              help='Also export one sample draw of the scenario size')
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_context
@reports_errors
def truth(ctx, scenario, population_size, seed, sample_out, out):
    """Generate the scenario population and write its true means"""
    config = _scenario(scenario, None).with_overrides({'seed': seed, 'population.size': population_size})
    population = generate_population(config)
    result = true_estimands(population)

    frame = pd.DataFrame(result.rows(), columns=['quantity', 'group', 'treatment', 'value'])
    _csv(frame, _out_dir(ctx, out) / 'truth.csv')
    if sample_out:
        write_sample(draw_sample(population, config.population.n, config.seed), sample_out)
    click.echo(frame.to_string(index=False))


def main():
    cli(obj=None)


if __name__ == '__main__':
    main()
