"""GN-model link function and NLI for fiber links with arbitrary power evolution.

The span integral of the profile kernel is reduced to closed-form monomial
integrals after a weighted polynomial fit of the kernel, so links with
inter-channel stimulated Raman scattering and Raman pumps are handled as
cheaply as the textbook exponential-loss case.
"""
from .errors import (ConfigError, ContractError, DomainError, FitDegeneracyError, FrequencyLookupError,
                     LinkFunctionError, OracleResolutionError, QuadratureToleranceError, ShootingError,
                     StepSizeError)
from .gn import (ChannelNli, IslandContribution, NliReport, QuadConfig, evaluate_channel, gn_nli_power,
                 gn_nli_psd, gn_psd_breakdown, gn_report)
from .config import RunConfig, build_run_config, load_config_file, validate_config
from .islands import Island, enumerate_islands, island_points, islands_to_csv
from .kernels import monomial_exp_integral, normalized_monomial_integrals
from .lf import (FitConfig, PsiFit, fit_island, fit_islands, fit_psi, fits_to_csv, link_function, link_function_island,
                 link_function_no_raman, psi, span_integral_oracle, span_integral_poly, span_integral_tau,
                 tau_coefficients, theta_exponent, vartheta)
from .link import (Amplifier, FiberSpan, Link, WdmGrid, end_of_span_factors, propagate_link, rho_at)
from .raman import (BACKWARD, FORWARD, PowerProfileSet, RamanGainProfile, SpectralComponent, raman_rhs,
                    silica_raman_gain, solve_power_evolution, zeta)
from .pipeline import RunResult, run_pipeline

__all__ = [
    "Amplifier", "BACKWARD", "build_run_config", "ChannelNli", "ConfigError", "ContractError", "DomainError",
    "end_of_span_factors", "enumerate_islands", "evaluate_channel", "FiberSpan", "fit_island", "fit_islands",
    "fit_psi", "FitConfig", "FitDegeneracyError", "fits_to_csv", "FORWARD", "FrequencyLookupError",
    "gn_nli_power", "gn_nli_psd", "gn_psd_breakdown", "gn_report", "Island", "island_points",
    "IslandContribution", "islands_to_csv", "Link", "link_function", "link_function_island",
    "link_function_no_raman", "LinkFunctionError", "load_config_file", "monomial_exp_integral", "NliReport",
    "normalized_monomial_integrals", "OracleResolutionError", "PowerProfileSet", "propagate_link", "psi",
    "PsiFit", "QuadConfig", "QuadratureToleranceError", "raman_rhs", "RamanGainProfile", "rho_at",
    "run_pipeline", "RunConfig", "RunResult", "ShootingError", "silica_raman_gain", "solve_power_evolution",
    "span_integral_oracle", "span_integral_poly", "span_integral_tau", "SpectralComponent", "StepSizeError",
    "tau_coefficients", "theta_exponent", "validate_config", "vartheta", "WdmGrid", "zeta",
]
