"""Componentwise proximal and clipping maps, plus the Huber penalty."""

import numpy as np

from .errors import NonPositiveGamma, NonPositiveSigma


def soft_threshold(v, gamma):
    """Prox of ``gamma * ||.||_1``.

    Componentwise: ``x - gamma`` above ``gamma``, ``x + gamma`` below
    ``-gamma`` and 0 on the closed interval ``[-gamma, gamma]``.
    """
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be positive, got {gamma}")
    v = np.asarray(v, dtype=float)
    return np.where(v > gamma, v - gamma, np.where(v < -gamma, v + gamma, 0.0))


def clip_box(v, sigma):
    """Clamp ``v`` to ``[-sigma, sigma]``; ``clip_box + soft_threshold == v``."""
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    v = np.asarray(v, dtype=float)
    # same branch split as soft_threshold so the decomposition is exact
    return np.where(v > sigma, sigma, np.where(v < -sigma, -sigma, v))


def huber_penalty(r, sigma):
    """Closed form of ``inf_b sigma |r - b| + b^2 / 2``.

    Returns ``r^2 / 2`` for ``|r| <= sigma`` and ``sigma |r| - sigma^2 / 2``
    otherwise. Vectorized over ``r``.
    """
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    out = np.where(a <= sigma, 0.5 * r * r, sigma * a - 0.5 * sigma * sigma)
    return out if out.ndim else float(out)
