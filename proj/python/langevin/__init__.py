"""Annealed Langevin samplers for MIMO detection and linear inverse problems."""

import csv
import io

from ._core import (
    ConfigError,
    DivergenceError,
    complex_to_real,
    config_keys,
    constellation_points,
    critical_mass,
    detect,
    detection_step_sizes,
    estimation_step_sizes,
    geometric_sigmas,
    list_presets,
    mass_from_preconditioner,
    preset_values,
    run,
    sigma0_from_snr,
    spectral_likelihood_score,
    spectral_preconditioner,
    symbol_error_rate,
    tweedie_prior_score,
)


def run_rows(config, overrides=None):
    """Like `run`, but parses the CSV into a list of dicts."""
    text = run(config, {k: str(v) for k, v in (overrides or {}).items()})
    return list(csv.DictReader(io.StringIO(text)))


__all__ = [
    "ConfigError",
    "DivergenceError",
    "complex_to_real",
    "config_keys",
    "constellation_points",
    "critical_mass",
    "detect",
    "detection_step_sizes",
    "estimation_step_sizes",
    "geometric_sigmas",
    "list_presets",
    "mass_from_preconditioner",
    "preset_values",
    "run",
    "run_rows",
    "sigma0_from_snr",
    "spectral_likelihood_score",
    "spectral_preconditioner",
    "symbol_error_rate",
    "tweedie_prior_score",
]
