"""Shared builders for tests."""

from __future__ import annotations

import numpy as np

from cuestream.features import FeatureBatch, FeatureFrame
from cuestream.sdem import EngineConfig, GmmState


def frames_from_matrix(x, t0=0.0, period=0.5, valid_channels=1):
    x = np.asarray(x, dtype=float)
    return [
        FeatureFrame(timestamp=t0 + i * period, values=row.copy(), valid=(True,) * valid_channels)
        for i, row in enumerate(x)
    ]


def batch_from_matrix(x, t0=0.0, period=0.5):
    frames = frames_from_matrix(x, t0=t0, period=period)
    return FeatureBatch(
        frames=tuple(frames), start_time=t0, end_time=t0 + len(frames) * period
    )


def state_from_arrays(weights, means, covs, config: EngineConfig | None = None) -> GmmState:
    """Build a state with accumulators consistent with the parameters."""
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    if config is None:
        config = EngineConfig(components=len(weights))
    mean_accs = weights[:, None] * means
    cov_accs = weights[:, None, None] * (covs + means[:, :, None] * means[:, None, :])
    return GmmState(
        config=config,
        weights=weights,
        means=means,
        covs=covs,
        mean_accs=mean_accs,
        cov_accs=cov_accs,
        ridges=np.zeros(len(weights)),
    )
