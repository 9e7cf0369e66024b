"""Huber-smoothed joint-sparsity objectives with closed-form gradients.

Two aggregators are supported. "row_l2" smooths the l2 norm of each row,
giving the l_{1,2}-style objective whose coupling across channels is the
whole point of joint recovery. "entry_l1" smooths every entry separately,
giving the l_{1,1} objective. Both arise from maximizing <u, .> - (mu/2)||u||^2
over the matching unit dual ball, which collapses to the Huber function

    h_mu(t) = t - mu/2        if t >= mu
            = t^2 / (2 mu)    otherwise

applied to row norms or to entry magnitudes. Rows listed in ``known_support``
are trusted nonzero locations: they contribute neither value nor gradient.
The gradient is (1/mu)-Lipschitz for either aggregator, which the solver
uses directly as its step-size constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidArgumentError, SupportSet, as_matrix, row_norms

AGGREGATOR_ROW_L2 = "row_l2"
AGGREGATOR_ENTRY_L1 = "entry_l1"
AGGREGATORS = (AGGREGATOR_ROW_L2, AGGREGATOR_ENTRY_L1)


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing parameter, row aggregator, and trusted support rows."""

    mu: float = 1.0
    aggregator: str = AGGREGATOR_ROW_L2
    known_support: SupportSet = SupportSet()

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise InvalidArgumentError(f"mu must be positive, got {self.mu!r}")
        if self.aggregator not in AGGREGATORS:
            raise InvalidArgumentError(
                f"unknown aggregator {self.aggregator!r}; use one of {AGGREGATORS}"
            )
        if not isinstance(self.known_support, SupportSet):
            object.__setattr__(
                self, "known_support", SupportSet.from_indices(self.known_support)
            )

    @property
    def lipschitz(self):
        """Lipschitz constant of the smoothed gradient."""
        return 1.0 / self.mu


def _huber(t, mu):
    return np.where(t >= mu, t - 0.5 * mu, (0.5 / mu) * t * t)


def smoothed_objective(alpha, cfg):
    """Value of the smoothed joint-sparsity objective at ``alpha``.

    Zero exactly when every row outside the trusted support is zero, and
    within mu * (number of smoothed terms) / 2 below the unsmoothed mixed
    norm restricted to those rows.
    """
    alpha = as_matrix(alpha, "coefficients")
    free = ~cfg.known_support.mask(alpha.shape[0])
    if cfg.aggregator == AGGREGATOR_ROW_L2:
        t = row_norms(alpha, 2)
        return float(_huber(t, cfg.mu)[free].sum())
    return float(_huber(np.abs(alpha), cfg.mu)[free].sum())


def smoothed_gradient(alpha, cfg):
    """Closed-form gradient of :func:`smoothed_objective`.

    For row_l2, row j is alpha(j,:)/mu inside the quadratic region and
    alpha(j,:)/||alpha(j,:)||_2 beyond it, so no row of the gradient ever
    exceeds unit l2 norm. Entries clip at +-1 for entry_l1. Trusted rows
    get an exactly zero gradient.
    """
    alpha = as_matrix(alpha, "coefficients")
    mask = cfg.known_support.mask(alpha.shape[0])
    if cfg.aggregator == AGGREGATOR_ROW_L2:
        t = row_norms(alpha, 2)
        denom = np.where(t >= cfg.mu, t, cfg.mu)
        grad = alpha / denom[:, None]
    else:
        grad = np.clip(alpha / cfg.mu, -1.0, 1.0)
    if mask.any():
        grad[mask] = 0.0
    return grad
