"""Stochastic truncated-subgradient estimation in coefficient space, and
estimation of the second-moment constants used by the step-size schedule.

The estimator draws theta samples from the measure, queries the problem's
per-theta subgradient (optionally noised), and averages against the basis:
the result is an unbiased Monte Carlo estimate of the coefficients of the
level-m truncated subgradient, in the same coordinates an Expansion of the
matching family uses (orthonormal coefficients for the polynomial family,
per-cell averages for the piecewise family). Reductions are plain fixed-order
numpy sums, so a fixed seed reproduces the output bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import basis as bs
from .problems import NoiseModel, ProblemSpec


@dataclass(frozen=True)
class OracleConfig:
    theta_samples_per_call: int = 64
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.theta_samples_per_call < 1:
            raise ValueError("theta_samples_per_call must be >= 1")


@dataclass(frozen=True)
class GVEstimate:
    """G_sq bounds E||g||^2 over the probed region (with a safety factor);
    V_sq is the exact variance added by the noise model."""

    G_sq: float
    V_sq: float

    def __post_init__(self):
        if not (np.isfinite(self.G_sq) and np.isfinite(self.V_sq)):
            raise ValueError("estimates must be finite")
        if self.G_sq < 0 or self.V_sq < 0:
            raise ValueError("estimates must be nonnegative")

    @property
    def total(self) -> float:
        return self.G_sq + self.V_sq


def estimate_truncated_subgradient(
    p: ProblemSpec,
    e: bs.Expansion,
    m: int,
    cfg: OracleConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo estimate of the level-m truncated subgradient at ``e``.

    For each sampled theta_j: synthesize x(theta_j), query the subgradient
    (noise drawn per sample when configured), and average g(theta_j) against
    the basis functions. Unbiased for the quadrature coefficients under zero
    noise as the sample count grows.
    """
    mes = e.basis.measure
    n = cfg.theta_samples_per_call
    thetas = rng.uniform(mes.a, mes.b, size=n)
    if e.basis.kind == bs.LEGENDRE:
        if not 1 <= m <= e.m:
            raise ValueError(f"m must be in [1, {e.m}]")
        B = e.basis.eval_matrix(thetas, e.m)
        x = B @ e.coefficients
    else:
        B = None
        x = bs.synthesize(e, thetas)
    noise = cfg.noise.draw(rng, (n, e.q))
    g = np.asarray(p.subgradient(x, thetas, noise), dtype=float)

    if B is not None:
        return B[:, :m].T @ g / n
    if m != e.m:
        raise ValueError("piecewise estimation uses all cells (m == e.m)")
    part = e.basis.partition
    idx = bs.cell_index(part, mes, thetas)
    acc = np.zeros((e.m, e.q))
    np.add.at(acc, idx, g)
    return acc / (n * bs.cell_measures(part, mes)[:, None])


def estimate_G_V(
    p: ProblemSpec,
    probes: Sequence[bs.Expansion],
    cfg: OracleConfig,
    rng: np.random.Generator,
) -> GVEstimate:
    """Estimate the subgradient second moment over a probe set.

    G_sq = 1.5 * max over probes of the sample mean of ||g(theta)||^2 with the
    noise switched off; V_sq is exact for the configured noise model.
    """
    if len(probes) == 0:
        raise ValueError("need at least one probe expansion")
    worst = 0.0
    # ||g||^2 is heavy-tailed for polynomial probes; the sample floor keeps
    # the estimator's spread well inside the 1.5x safety factor
    n = max(cfg.theta_samples_per_call, 512)
    for e in probes:
        mes = e.basis.measure
        thetas = rng.uniform(mes.a, mes.b, size=n)
        g = np.asarray(p.subgradient(bs.synthesize(e, thetas), thetas), dtype=float)
        worst = max(worst, float(np.mean(np.sum(g**2, axis=-1))))
    return GVEstimate(G_sq=1.5 * worst, V_sq=cfg.noise.variance_total(p.dimension))
