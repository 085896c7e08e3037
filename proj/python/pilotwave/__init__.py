"""Classical, Bohmian and semiclassical trajectory laboratory."""

from ._core import (
    ConfigError,
    DiamagneticSystem,
    DomainError,
    NodeSingularity,
    NumericalError,
    ScenarioFailure,
    SolvableSystem,
    Superposition,
    SystemConstants,
    __version__,
    bohmian_lyapunov,
    catalog_names,
    circulation,
    coverage_fraction,
    equilibrium_l1,
    integrate_bohmian,
    integrate_classical,
    launch_from_nucleus,
    lyapunov_exponent,
    mean_level_density,
    read_table,
    recurrence_spectrum,
    run_scenario,
    semiclassical_green_1d,
    spectrum,
    validate_scenario,
    van_vleck_1d,
)

CHAOS_THRESHOLD = 0.01


def regime(lyapunov):
    """'chaotic' or 'regular' under the threshold used by the comparison reports."""
    return "chaotic" if lyapunov >= CHAOS_THRESHOLD else "regular"
