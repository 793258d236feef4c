"""Local surrogate explanations via neighborhood perturbation.

Samples a cloud of perturbed instances around x in the normalized
feature space, weights them by an exponential proximity kernel, fits a
weighted ridge regression to the model's attack probability, and keeps
the top-k coefficients as the explanation. Unlike SHAP attributions,
these carry no efficiency guarantee.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import ColumnStats, FeatureSchema
from .errors import NumericalError
from .numopt import solve_weighted_ridge
from .shap import Attribution


@dataclass
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float | None = None   # default 0.75 * sqrt(d)
    top_k: int = 10
    ridge_lambda: float = 1.0
    seed: int = 0

    def validate(self, d):
        if self.n_samples < 10:
            raise ValueError("n_samples must be >= 10")
        if self.top_k > d:
            raise ValueError("top_k cannot exceed the feature count")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")

    def width(self, d):
        return self.kernel_width if self.kernel_width is not None else 0.75 * np.sqrt(d)


def perturb(x, schema: FeatureSchema, train_stats: ColumnStats, n, seed=0):
    """Sample n perturbed rows around x; row 0 is x itself.

    Numeric columns get Gaussian noise scaled by the column's training
    standard deviation, clipped to [0, 1]. Each one-hot group is, with
    probability 1/2, resampled whole from the training marginals. The
    returned mask holds 1 where a column kept its original value.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = schema.n_encoded
    if x.size != d:
        raise ValueError(f"expected {d} encoded columns")
    rng = np.random.default_rng(seed)

    samples = np.tile(x, (n, 1))
    if n > 1:
        group_cols = np.zeros(d, dtype=bool)
        for start, size in schema.groups.values():
            group_cols[start : start + size] = True
        numeric_cols = np.flatnonzero(~group_cols)

        body = samples[1:]
        noise = rng.normal(size=(n - 1, numeric_cols.size))
        body[:, numeric_cols] = np.clip(
            body[:, numeric_cols] + noise * train_stats.std[numeric_cols], 0.0, 1.0)

        for feat, (start, size) in schema.groups.items():
            freqs = train_stats.group_freq[feat]
            flip = rng.random(n - 1) < 0.5
            draws = rng.choice(size, size=n - 1, p=freqs)
            for i in np.flatnonzero(flip):
                body[i, start : start + size] = 0.0
                body[i, start + draws[i]] = 1.0

    mask = (samples == x[None, :]).astype(np.uint8)
    return samples, mask


def explain_lime(model_fn, x, schema: FeatureSchema, train_stats: ColumnStats,
                 cfg: LimeConfig | None = None) -> Attribution:
    """Fit a sparse local linear surrogate to model_fn around x."""
    cfg = cfg or LimeConfig()
    x = np.asarray(x, dtype=np.float64).ravel()
    d = schema.n_encoded
    cfg.validate(d)

    samples, _ = perturb(x, schema, train_stats, cfg.n_samples, seed=cfg.seed)
    if np.all(samples == samples[0]):
        raise NumericalError("degenerate sampling: all perturbed rows identical")

    preds = np.asarray(model_fn(samples), dtype=np.float64).ravel()
    if not np.all(np.isfinite(preds)):
        raise NumericalError("model returned non-finite values")

    dist = np.linalg.norm(samples - x[None, :], axis=1)
    kw = cfg.width(d)
    weights = np.exp(-(dist ** 2) / (kw ** 2))

    coef, intercept = solve_weighted_ridge(samples, preds, weights,
                                           lam=cfg.ridge_lambda, fit_intercept=True)
    phi = np.zeros(d)
    keep = np.argsort(-np.abs(coef), kind="stable")[: cfg.top_k]
    phi[keep] = coef[keep]

    return Attribution(
        method="lime",
        feature_names=list(schema.encoded_columns),
        phi=phi,
        base_value=float(intercept),
        model_output=float(np.asarray(model_fn(x[None, :])).ravel()[0]),
        target_class=1,
        instance=x.copy(),
    )


def weighted_r2(samples, preds, weights, coef, intercept):
    """Weighted R^2 of the surrogate; >= 0 means better than intercept-only."""
    fitted = samples @ coef + intercept
    w = weights / weights.sum()
    mean = float(w @ preds)
    ss_res = float(w @ (preds - fitted) ** 2)
    ss_tot = float(w @ (preds - mean) ** 2)
    if ss_tot == 0:
        return 1.0
    return 1.0 - ss_res / ss_tot
