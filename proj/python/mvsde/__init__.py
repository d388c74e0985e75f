"""McKean-Vlasov interacting-particle Euler-Maruyama toolkit."""

from ._core import (
    DEFAULT_ETA,
    BlowUpError,
    ConfigError,
    Error,
    Model,
    bihari,
    catalog_ids,
    em_run,
    fit_rate,
    format_double,
    grid_points,
    kappa_eta,
    make_model,
    osgood_integral,
    rate_study,
    rho_lower,
    rho_upper,
)

__all__ = [
    "DEFAULT_ETA",
    "BlowUpError",
    "ConfigError",
    "Error",
    "Model",
    "bihari",
    "catalog_ids",
    "em_run",
    "fit_rate",
    "format_double",
    "grid_points",
    "kappa_eta",
    "make_model",
    "osgood_integral",
    "rate_study",
    "rho_lower",
    "rho_upper",
]
