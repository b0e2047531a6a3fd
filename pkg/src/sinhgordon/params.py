"""Model parameters and the derived coupling constants.

Every estimator in the package takes a ``ModelParams`` instance rather than
raw ``(gamma, mu, radius)`` so the radius reduction happens in exactly one
place.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonPositive, OutOfRangeGamma


@dataclass(frozen=True)
class ModelParams:
    """Validated coupling data.

    ``q_const = gamma/2 + 2/gamma`` bounds the admissible vertex weights and
    ``mu_scaled = mu * radius**(gamma*q_const)`` is the coupling of the
    equivalent unit-radius model.  Both are stored, not recomputed, so run
    manifests are self-describing.
    """

    gamma: float
    mu: float
    radius: float
    q_const: float
    mu_scaled: float

    @property
    def is_unit_radius(self) -> bool:
        return self.radius == 1.0


def validate_params(gamma: float, mu: float, radius: float) -> ModelParams:
    """Check ranges and derive the dependent constants.

    Raises:
        OutOfRangeGamma: if ``gamma`` is not in the open interval (0, 2).
        NonPositive: if ``mu`` or ``radius`` is not strictly positive.
    """
    gamma = float(gamma)
    mu = float(mu)
    radius = float(radius)
    if not (0.0 < gamma < 2.0):
        raise OutOfRangeGamma(f"gamma must lie in (0, 2), got {gamma}")
    if mu <= 0.0:
        raise NonPositive(f"mu must be positive, got {mu}")
    if radius <= 0.0:
        raise NonPositive(f"radius must be positive, got {radius}")
    q = gamma / 2.0 + 2.0 / gamma
    return ModelParams(
        gamma=gamma,
        mu=mu,
        radius=radius,
        q_const=q,
        mu_scaled=mu * radius ** (gamma * q),
    )


def reduce_to_unit_radius(params: ModelParams) -> ModelParams:
    """Equivalent unit-radius model: (gamma, mu, R) -> (gamma, mu*R^{gamma*Q}, 1)."""
    if params.is_unit_radius:
        return params
    return validate_params(params.gamma, params.mu_scaled, 1.0)


def from_reduced(gamma: float, mu_scaled: float, radius: float) -> ModelParams:
    """Invert the reduction: recover the radius-R model from (gamma, mu_R)."""
    q = gamma / 2.0 + 2.0 / gamma
    return validate_params(gamma, mu_scaled * radius ** (-gamma * q), radius)
