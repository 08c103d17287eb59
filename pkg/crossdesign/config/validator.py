"""Scenario file validation"""
from typing import Dict, List, Mapping, Set


class ConfigValidator:
    """Validate the section and key layout of a scenario file"""

    REQUIRED_SECTIONS = {'population', 'selection', 'treatment', 'outcome'}

    KNOWN_KEYS: Dict[str, Set[str]] = {
        'scenario': {'name', 'seed'},
        'population': {'size', 'n', 'u_distribution', 'u_observed'},
        'selection': {'rule', 'lower_quantile', 'upper_quantile', 'target_fraction',
                      'ratio', 'overlap_probability'},
        'treatment': {'rct_probability', 'obs_intercept', 'u_coef'},
        'outcome': {'variant', 'u_coef', 'noise_sd'},
        'fit': {'outcome', 'propensity', 'selection', 'g', 'alpha_fraction',
                'beta_fraction', 'scale', 'trim_floor', 'g_by_arm', 'overlap',
                'ensemble_folds', 'fold_seed'},
        'run': {'iterations', 'bootstrap', 'level', 'multiplicity', 'estimators',
                'threads', 'stratified', 'freeze_overlap'},
    }

    def validate_config_file(self, config: Mapping[str, Mapping[str, str]]) -> List[str]:
        """Validate a parsed scenario file, returning a list of problems"""
        errors = []

        # Check required sections
        missing_sections = self.REQUIRED_SECTIONS - set(config.keys())
        if missing_sections:
            errors.append(f"Missing config sections: {sorted(missing_sections)}")

        for section, values in config.items():
            if section not in self.KNOWN_KEYS:
                errors.append(f"Unknown section [{section}]")
                continue
            unknown = set(values.keys()) - self.KNOWN_KEYS[section]
            if unknown:
                errors.append(f"Unknown keys in [{section}]: {sorted(unknown)}")

        return errors
