"""Online Gaussian-mixture outlier scoring with sequential discounting.

The model is an l-component Gaussian mixture whose parameters are refit
on every incoming frame through exponentially discounted accumulators:

    gamma_i = c_i N(x | mu_i, S_i) / sum_j c_j N(x | mu_j, S_j)
    c_i     <- (1 - r) c_i     + r gamma_i
    m_i     <- (1 - r) m_i     + r gamma_i x          (mean accumulator)
    mu_i    = m_i / c_i
    V_i     <- (1 - r) V_i     + r gamma_i x x^T      (cov accumulator)
    S_i     = V_i / c_i - mu_i mu_i^T

with responsibilities always computed from the pre-update parameters.
The forgetting rate r in (0, 1) controls how fast old data is discarded.

A frame's outlierness is the negative log of its mixture density,

    a(x) = -ln sum_i c_i N(x | mu_i, S_i)

computed via log-sum-exp with the density floored at e^-700 so the score
stays finite. A batch scores as the mean of its per-frame outlierness,
which keeps thresholds comparable across batch-size configurations.

After every covariance refit a scaled ridge eps * (tr(S)/M + 1) * I is
added; the raw recurrences can otherwise collapse a covariance on
near-constant channels (e.g. a sentinel-held sensor).
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass


import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp, softmax

from .features import FeatureBatch

LOG_2PI = math.log(2.0 * math.pi)
LOG_DENSITY_FLOOR = -700.0

COVARIANCE_MODES = ("full", "diagonal")


class InsufficientDataError(ValueError):
    """Not enough frames to initialize the mixture."""


class ShapeError(ValueError):
    """Input dimensionality does not match the model."""


class NumericDegeneracyError(ArithmeticError):
    """A covariance lost positive definiteness despite regularization.

    Surfaces data pathology (e.g. exact duplicates flooding a window);
    never silently ignored.
    """


@dataclass(frozen=True)
class EngineConfig:
    """Mixture size, forgetting rate, and numerical policy."""

    components: int = 2
    forgetting_rate: float = 0.1
    covariance_mode: str = "full"
    ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if not (0.0 < self.forgetting_rate < 1.0):
            raise ValueError("forgetting_rate must lie in (0, 1)")
        if self.covariance_mode not in COVARIANCE_MODES:
            raise ValueError(f"covariance_mode must be one of {COVARIANCE_MODES}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def to_obj(self) -> dict:
        return {
            "components": self.components,
            "forgetting_rate": self.forgetting_rate,
            "covariance_mode": self.covariance_mode,
            "ridge": self.ridge,
            "seed": self.seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "EngineConfig":
        return cls(
            components=int(obj["components"]),
            forgetting_rate=float(obj["forgetting_rate"]),
            covariance_mode=str(obj["covariance_mode"]),
            ridge=float(obj["ridge"]),
            seed=int(obj["seed"]),
        )


@dataclass(frozen=True)
class GmmComponent:
    """Read-only view of one mixture component.

    ``mean_acc`` and ``cov_acc`` are the discounted accumulators backing
    ``mean`` and ``cov``; ``applied_ridge`` is the ridge added to ``cov``
    in the most recent refit, so the consistency identity

        cov == cov_acc / weight - outer(mean, mean) + applied_ridge * I

    is checkable exactly.
    """

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    mean_acc: np.ndarray
    cov_acc: np.ndarray
    applied_ridge: float


class GmmState:
    """The mixture state owned by one logical stream.

    Scoring methods never mutate and may run concurrently against a
    snapshot; update methods mutate in place and must be called from a
    single logical thread per session.
    """

    def __init__(
        self,
        config: EngineConfig,
        weights: np.ndarray,
        means: np.ndarray,
        covs: np.ndarray,
        mean_accs: np.ndarray,
        cov_accs: np.ndarray,
        ridges: np.ndarray,
        update_count: int = 0,
    ):
        self.config = config
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.covs = np.asarray(covs, dtype=float)
        self.mean_accs = np.asarray(mean_accs, dtype=float)
        self.cov_accs = np.asarray(cov_accs, dtype=float)
        self.ridges = np.asarray(ridges, dtype=float)
        self.update_count = update_count
        self._eye = np.eye(self.n_dims)
        self._refresh_factors()

    # -- construction ---------------------------------------------------

    @classmethod
    def initialize(cls, first_batch: FeatureBatch, config: EngineConfig) -> "GmmState":
        """Seed the mixture from the first batch.

        Weights are uniform; means are l distinct frames picked by
        farthest-point traversal from a seeded random start; covariances
        are the batch's per-dimension variances on the diagonal plus the
        ridge. Accumulators are set consistently with those parameters.
        """
        x = first_batch.matrix()
        n, m = x.shape
        l = config.components
        if n < l:
            raise InsufficientDataError(
                f"initialization needs at least {l} frames, batch has {n}"
            )
        rng = np.random.default_rng(config.seed)
        chosen = [int(rng.integers(n))]
        min_sq = np.sum((x - x[chosen[0]]) ** 2, axis=1)
        while len(chosen) < l:
            min_sq[chosen] = -1.0  # never re-pick an index
            nxt = int(np.argmax(min_sq))
            chosen.append(nxt)
            min_sq = np.minimum(min_sq, np.sum((x - x[nxt]) ** 2, axis=1))

        variances = x.var(axis=0)
        scale = config.ridge * (float(variances.sum()) / m + 1.0)
        cov = np.diag(variances + scale)
        weights = np.full(l, 1.0 / l)
        means = x[chosen].copy()
        covs = np.broadcast_to(cov, (l, m, m)).copy()
        mean_accs = weights[:, None] * means
        cov_accs = weights[:, None, None] * (
            covs + means[:, :, None] * means[:, None, :]
        )
        return cls(
            config=config,
            weights=weights,
            means=means,
            covs=covs,
            mean_accs=mean_accs,
            cov_accs=cov_accs,
            ridges=np.zeros(l),
            update_count=0,
        )

    # -- basic properties ------------------------------------------------

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[GmmComponent]:
        """Per-component views (copies) of the current parameters."""
        return [
            GmmComponent(
                weight=float(self.weights[i]),
                mean=self.means[i].copy(),
                cov=self.covs[i].copy(),
                mean_acc=self.mean_accs[i].copy(),
                cov_acc=self.cov_accs[i].copy(),
                applied_ridge=float(self.ridges[i]),
            )
            for i in range(self.n_components)
        ]

    # -- densities --------------------------------------------------------

    def _refresh_factors(self) -> None:
        try:
            self._chols = np.linalg.cholesky(self.covs)
        except np.linalg.LinAlgError as exc:
            raise NumericDegeneracyError(
                "covariance is not positive definite after ridge regularization"
            ) from exc
        diag = np.diagonal(self._chols, axis1=1, axis2=2)
        self._logdets = 2.0 * np.sum(np.log(diag), axis=1)

    def _check_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_dims,):
            raise ShapeError(f"expected a vector of {self.n_dims} values, got {x.shape}")
        return x

    def _component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """Per-component Gaussian log densities, shape (n, l)."""
        n = x.shape[0]
        out = np.empty((n, self.n_components))
        for i in range(self.n_components):
            diff = (x - self.means[i]).T
            z = solve_triangular(self._chols[i], diff, lower=True, check_finite=False)
            quad = np.einsum("ij,ij->j", z, z)
            out[:, i] = -0.5 * (self.n_dims * LOG_2PI + self._logdets[i] + quad)
        return out

    def _mixture_log_density(self, x: np.ndarray) -> np.ndarray:
        log_dens = self._component_log_densities(x)
        return logsumexp(log_dens + np.log(self.weights), axis=1)

    # -- scoring -----------------------------------------------------------

    def score_frame(self, x: np.ndarray) -> float:
        """Outlierness of one frame: -ln of its mixture density."""
        x = self._check_vector(x)
        log_mix = float(self._mixture_log_density(x[None, :])[0])
        return -max(log_mix, LOG_DENSITY_FLOOR)

    def score_batch(self, batch: FeatureBatch) -> float:
        """Mean per-frame outlierness over a batch."""
        x = batch.matrix()
        if x.shape[1] != self.n_dims:
            raise ShapeError(f"expected {self.n_dims}-dim frames, got {x.shape[1]}")
        log_mix = np.maximum(self._mixture_log_density(x), LOG_DENSITY_FLOOR)
        return float(np.mean(-log_mix))

    # -- updating ------------------------------------------------------------

    def update_frame(self, x: np.ndarray) -> np.ndarray:
        """Apply the discounted recurrences for one frame.

        Returns the responsibility vector gamma (computed from the
        pre-update parameters), exposed for testing.
        """
        x = self._check_vector(x)
        log_dens = self._component_log_densities(x[None, :])[0]
        gamma = softmax(log_dens + np.log(self.weights))

        r = self.config.forgetting_rate
        self.weights = (1.0 - r) * self.weights + r * gamma
        self.mean_accs = (1.0 - r) * self.mean_accs + r * gamma[:, None] * x
        self.means = self.mean_accs / self.weights[:, None]
        outer = x[:, None] * x[None, :]
        self.cov_accs = (1.0 - r) * self.cov_accs + r * gamma[:, None, None] * outer
        covs = self.cov_accs / self.weights[:, None, None] - (
            self.means[:, :, None] * self.means[:, None, :]
        )
        if self.config.covariance_mode == "diagonal":
            covs = covs * self._eye
        traces = np.trace(covs, axis1=1, axis2=2)
        self.ridges = self.config.ridge * (traces / self.n_dims + 1.0)
        self.covs = covs + self.ridges[:, None, None] * self._eye
        self._refresh_factors()
        self.update_count += 1
        return gamma

    def update_batch(self, batch: FeatureBatch) -> None:
        """Fold :meth:`update_frame` over the batch's frames in time order."""
        for frame in batch.frames:
            self.update_frame(frame.values)

    # -- frame selection --------------------------------------------------

    def representative_frames(self, batch: FeatureBatch) -> list[int]:
        """Index of the highest-density batch frame for each component.

        Ties resolve to the earliest index.
        """
        x = batch.matrix()
        if x.shape[1] != self.n_dims:
            raise ShapeError(f"expected {self.n_dims}-dim frames, got {x.shape[1]}")
        log_dens = self._component_log_densities(x)
        return [int(np.argmax(log_dens[:, i])) for i in range(self.n_components)]

    def outlier_frames(self, batch: FeatureBatch, count: int) -> list[int]:
        """Indices of the ``count`` lowest mixture-likelihood frames.

        Sorted by ascending likelihood, ties by earliest index;
        ``count=1`` is the single most significant outlier frame.
        """
        n = len(batch)
        if not (1 <= count <= n):
            raise ValueError(f"count must lie in [1, {n}], got {count}")
        log_mix = self._mixture_log_density(batch.matrix())
        order = np.argsort(log_mix, kind="stable")
        return [int(i) for i in order[:count]]

    # -- snapshots --------------------------------------------------------

    def to_snapshot(self) -> dict:
        """JSON-ready snapshot; floats encoded as hex for bit-exact replay."""
        return {
            "config": self.config.to_obj(),
            "update_count": self.update_count,
            "components": [
                {
                    "weight": float(self.weights[i]).hex(),
                    "mean": _encode_array(self.means[i]),
                    "cov": _encode_array(self.covs[i]),
                    "mean_acc": _encode_array(self.mean_accs[i]),
                    "cov_acc": _encode_array(self.cov_accs[i]),
                    "applied_ridge": float(self.ridges[i]).hex(),
                }
                for i in range(self.n_components)
            ],
        }

    @classmethod
    def from_snapshot(cls, obj: dict) -> "GmmState":
        config = EngineConfig.from_obj(obj["config"])
        comps = obj["components"]
        m = None
        weights, means, covs, mean_accs, cov_accs, ridges = [], [], [], [], [], []
        for c in comps:
            mean = _decode_array(c["mean"])
            m = mean.shape[0]
            weights.append(float.fromhex(c["weight"]))
            means.append(mean)
            covs.append(_decode_array(c["cov"]).reshape(m, m))
            mean_accs.append(_decode_array(c["mean_acc"]))
            cov_accs.append(_decode_array(c["cov_acc"]).reshape(m, m))
            ridges.append(float.fromhex(c["applied_ridge"]))
        return cls(
            config=config,
            weights=np.array(weights),
            means=np.array(means),
            covs=np.array(covs),
            mean_accs=np.array(mean_accs),
            cov_accs=np.array(cov_accs),
            ridges=np.array(ridges),
            update_count=int(obj["update_count"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_snapshot(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GmmState":
        return cls.from_snapshot(json.loads(text))


def _encode_array(arr: np.ndarray) -> str:
    """Base64 of the little-endian float64 buffer (shape carried by context)."""
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").copy()
