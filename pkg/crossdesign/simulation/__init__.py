"""Data-generating mechanisms, ground truths and the Monte Carlo runner"""
from crossdesign.simulation.scenarios import (
    ALL_ESTIMATORS, OUTCOME_VARIANTS, ScenarioConfig, load_scenario, parse_scenario_text,
    scenario_from_dict
)
from crossdesign.simulation.population import (
    TREATMENT_LEVELS, ConfoundingDecomposition, Population, PopulationTruth,
    confounding_decomposition, draw_sample, generate_population, true_estimands
)
from crossdesign.simulation.designs import resolve_spec
from crossdesign.simulation.oracle import DiscreteModel
from crossdesign.simulation.runner import (
    REPORT_COLUMNS, EstimateMetrics, SimulationReport, estimate_metrics, plan_for_scenario,
    run_scenario
)

__all__ = [
    'ALL_ESTIMATORS', 'OUTCOME_VARIANTS', 'ScenarioConfig', 'load_scenario', 'parse_scenario_text',
    'scenario_from_dict',
    'TREATMENT_LEVELS', 'ConfoundingDecomposition', 'Population', 'PopulationTruth',
    'confounding_decomposition', 'draw_sample', 'generate_population', 'true_estimands',
    'resolve_spec', 'DiscreteModel',
    'REPORT_COLUMNS', 'EstimateMetrics', 'SimulationReport', 'estimate_metrics', 'plan_for_scenario',
    'run_scenario',
]
