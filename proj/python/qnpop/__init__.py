"""Competitive density-dependent population processes.

Exact jump-chain simulation, fluid-limit flows, slow-manifold geometry and
the limiting diffusion on the manifold. The heavy lifting lives in the
compiled extension; this package re-exports its public surface.
"""

from ._core import (
    Model,
    QnError,
    chart,
    effective_density,
    flow,
    double_monod,
    gause_lotka_volterra,
    generator_coefficients,
    jump_moment_oracle,
    neutral_logistic,
    pushforward_frequency,
    simulate,
    simulate_diffusion,
    zoo,
    zoo_names,
    __version__,
)

__all__ = [
    "Model",
    "QnError",
    "chart",
    "effective_density",
    "flow",
    "double_monod",
    "gause_lotka_volterra",
    "generator_coefficients",
    "jump_moment_oracle",
    "neutral_logistic",
    "pushforward_frequency",
    "simulate",
    "simulate_diffusion",
    "zoo",
    "zoo_names",
    "__version__",
]
