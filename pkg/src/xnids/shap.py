"""KernelSHAP attribution plus summary / force-plot data products.

Coalitions are binary masks over features: masked features take the
explained instance's values, unmasked ones are imputed from background
rows and averaged. Contributions come from a Shapley-kernel weighted
regression constrained so contributions plus the base value reproduce
the model output exactly (efficiency).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .numopt import solve_weighted_ridge

EXHAUSTIVE_LIMIT = 15  # enumerate all coalitions up to this many features


@dataclass
class Attribution:
    method: str               # "shap" | "lime"
    feature_names: list
    phi: np.ndarray
    base_value: float
    model_output: float
    target_class: int
    instance: np.ndarray

    def efficiency_gap(self) -> float:
        return float(abs(self.base_value + self.phi.sum() - self.model_output))


@dataclass
class BackgroundSet:
    values: np.ndarray  # (size, d) rows drawn from training data
    seed: int

    @property
    def size(self):
        return self.values.shape[0]


def sample_background(train_values, size=100, seed=0) -> BackgroundSet:
    """Uniform seeded sample of training rows used for imputation."""
    train_values = np.asarray(train_values, dtype=np.float64)
    n = train_values.shape[0]
    if n == 0:
        raise ValueError("cannot sample a background from empty data")
    rng = np.random.default_rng(seed)
    take = min(size, n)
    idx = rng.choice(n, size=take, replace=False)
    idx.sort()
    return BackgroundSet(values=train_values[idx].copy(), seed=seed)


def kernel_shap(model_fn, x, bg: BackgroundSet, n_coalitions="auto", seed=0,
                feature_names=None, ridge_lambda=1e-6) -> Attribution:
    """Shapley-kernel attribution of model_fn's output at x.

    model_fn maps a (n, d) batch to (n,) outputs (attack probability).
    n_coalitions: "auto" (exhaustive when d <= 15, else 2d + 2048), an
    integer >= d + 2, or "exhaustive".
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.size
    if bg.values.shape[1] != d:
        raise ValueError("background dimension does not match the instance")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(d)]
    if len(names) != d:
        raise ValueError("feature_names length mismatch")

    exhaustive = n_coalitions == "exhaustive" or (n_coalitions == "auto" and d <= EXHAUSTIVE_LIMIT)
    if n_coalitions == "exhaustive" and d > EXHAUSTIVE_LIMIT + 6:
        raise ValueError(f"exhaustive enumeration is limited to ~{EXHAUSTIVE_LIMIT} features")
    if isinstance(n_coalitions, int) and n_coalitions < d + 2:
        raise ValueError(f"n_coalitions must be at least d + 2 = {d + 2}")

    base_value = float(np.mean(_eval(model_fn, bg.values)))
    model_output = float(_eval(model_fn, x[None, :])[0])

    if exhaustive:
        Z, weights = _exhaustive_coalitions(d)
    else:
        budget = (2 * d + 2048) if n_coalitions == "auto" else int(n_coalitions)
        Z, weights = _sample_coalitions(d, budget - 2, np.random.default_rng(seed))

    target_sum = model_output - base_value
    if Z.shape[0] == 0:
        phi = np.zeros(d)
        if d >= 1:
            phi[0] = target_sum  # d == 1: efficiency pins the single value
    else:
        v = _coalition_values(model_fn, Z, x, bg.values)
        lam = 0.0 if exhaustive else ridge_lambda
        phi, _ = solve_weighted_ridge(Z.astype(np.float64), v - base_value,
                                      weights, lam=lam, coef_sum=target_sum)

    return Attribution(
        method="shap",
        feature_names=names,
        phi=phi,
        base_value=base_value,
        model_output=model_output,
        target_class=1,
        instance=x.copy(),
    )


def _eval(model_fn, batch):
    out = np.asarray(model_fn(batch), dtype=np.float64).ravel()
    if not np.all(np.isfinite(out)):
        raise NumericalError("model returned non-finite values")
    return out


def _coalition_values(model_fn, Z, x, bg, chunk=256):
    """Mean masked prediction per coalition row of Z."""
    k, d = Z.shape
    nb = bg.shape[0]
    values = np.empty(k)
    for start in range(0, k, chunk):
        zc = Z[start : start + chunk]
        # (c, nb, d): coalition features from x, the rest from each bg row
        block = np.where(zc[:, None, :].astype(bool), x[None, None, :], bg[None, :, :])
        out = _eval(model_fn, block.reshape(-1, d))
        values[start : start + chunk] = out.reshape(len(zc), nb).mean(axis=1)
    return values


def _kernel_mass(d, s):
    # total Shapley-kernel weight of all coalitions of size s
    return (d - 1) / (s * (d - s))


def _exhaustive_coalitions(d):
    sizes = np.arange(1, d)
    rows = []
    weights = []
    for s in sizes:
        per = _kernel_mass(d, s) / math.comb(d, s)
        for bits in _combinations_bits(d, s):
            rows.append(bits)
            weights.append(per)
    Z = np.array(rows, dtype=np.float64) if rows else np.zeros((0, d))
    return Z, np.array(weights)


def _combinations_bits(d, s):
    import itertools

    for combo in itertools.combinations(range(d), s):
        bits = np.zeros(d)
        bits[list(combo)] = 1.0
        yield bits


def _sample_coalitions(d, budget, rng):
    """Kernel-mass-biased subset-size sampling without replacement.

    Each size's total kernel mass is split evenly across the subsets
    actually sampled at that size, keeping the weighted regression an
    unbiased estimate of the full enumeration.
    """
    sizes = list(range(1, d))
    mass = np.array([_kernel_mass(d, s) for s in sizes])
    capacity = [math.comb(d, s) if s <= 30 or d - s <= 30 else None for s in sizes]
    counts = [0] * len(sizes)
    chosen = set()
    rows = []
    row_sizes = []

    active = mass.copy()
    for _ in range(budget):
        total = active.sum()
        if total <= 0:
            break
        s_idx = int(rng.choice(len(sizes), p=active / total))
        s = sizes[s_idx]
        subset = _draw_unseen(d, s, rng, chosen, capacity[s_idx], counts[s_idx])
        if subset is None:
            active[s_idx] = 0.0
            continue
        chosen.add(subset)
        counts[s_idx] += 1
        bits = np.zeros(d)
        bits[list(subset)] = 1.0
        rows.append(bits)
        row_sizes.append(s_idx)
        if capacity[s_idx] is not None and counts[s_idx] >= capacity[s_idx]:
            active[s_idx] = 0.0

    if not rows:
        return np.zeros((0, d)), np.zeros(0)
    Z = np.array(rows)
    weights = np.array([mass[si] / counts[si] for si in row_sizes])
    return Z, weights


def _draw_unseen(d, s, rng, chosen, cap, count):
    if cap is not None and count >= cap:
        return None
    for _ in range(64):
        subset = tuple(sorted(rng.choice(d, size=s, replace=False).tolist()))
        if subset not in chosen:
            return subset
    if cap is not None and cap <= 100_000:
        import itertools

        remaining = [c for c in itertools.combinations(range(d), s) if c not in chosen]
        if not remaining:
            return None
        return remaining[int(rng.integers(len(remaining)))]
    return None


# ---------------------------------------------------------------------------
# data products


@dataclass
class SummaryData:
    feature_names: list
    phi_matrix: np.ndarray     # (n_instances, d)
    value_matrix: np.ndarray   # (n_instances, d) feature values
    ranking: np.ndarray        # feature indices by mean |phi| descending

    @property
    def mean_abs_phi(self):
        return np.abs(self.phi_matrix).mean(axis=0)


def global_summary(attrs, instances=None) -> SummaryData:
    """Aggregate attributions into ranking + beeswarm pairs.

    Ranking is by mean |phi| descending with ties broken by original
    feature order.
    """
    if not attrs:
        raise ValueError("need at least one attribution")
    names = attrs[0].feature_names
    for a in attrs:
        if a.feature_names != names:
            raise ValueError("attributions disagree on feature names")
    phi = np.vstack([a.phi for a in attrs])
    if instances is None:
        values = np.vstack([a.instance for a in attrs])
    else:
        values = np.asarray(instances, dtype=np.float64)
        if values.shape != phi.shape:
            raise ValueError("instances shape does not match attributions")
    mean_abs = np.abs(phi).mean(axis=0)
    order = np.lexsort((np.arange(len(names)), -mean_abs))
    return SummaryData(feature_names=list(names), phi_matrix=phi,
                       value_matrix=values, ranking=order)


@dataclass
class ForceSegment:
    feature: str
    value: float
    phi: float


@dataclass
class ForcePlotData:
    base_value: float
    model_output: float
    positive: list  # ForceSegment, descending phi
    negative: list  # ForceSegment, ascending phi


def force_data(attr: Attribution) -> ForcePlotData:
    """Split an attribution into opposing sorted segment lists."""
    if attr.method == "shap" and attr.efficiency_gap() > 1e-6:
        raise ValueError("attribution violates efficiency; refuse to plot it")
    segs = [
        ForceSegment(feature=n, value=float(v), phi=float(p))
        for n, v, p in zip(attr.feature_names, attr.instance, attr.phi)
    ]
    positive = sorted((s for s in segs if s.phi > 0), key=lambda s: -s.phi)
    negative = sorted((s for s in segs if s.phi < 0), key=lambda s: s.phi)
    return ForcePlotData(
        base_value=attr.base_value,
        model_output=attr.model_output,
        positive=positive,
        negative=negative,
    )


@dataclass
class StackedForceData:
    feature_names: list
    groups: list               # (label, [column indices]) in first-seen order
    phi_columns: np.ndarray    # (n_instances, d), rows ordered as displayed
    model_outputs: np.ndarray
    base_value: float


def stacked_force(attrs, group_labels) -> StackedForceData:
    """Group per-instance attributions into contiguous blocks.

    Within a group, instances order by model output descending.
    """
    if len(attrs) != len(group_labels):
        raise ValueError("one group label per attribution required")
    if not attrs:
        raise ValueError("need at least one attribution")
    names = attrs[0].feature_names
    order_of_group = {}
    for lab in group_labels:
        order_of_group.setdefault(lab, len(order_of_group))

    indexed = list(range(len(attrs)))
    indexed.sort(key=lambda i: (order_of_group[group_labels[i]],
                                -attrs[i].model_output, i))
    phi_columns = np.vstack([attrs[i].phi for i in indexed])
    outputs = np.array([attrs[i].model_output for i in indexed])
    groups = []
    for lab, _ in sorted(order_of_group.items(), key=lambda kv: kv[1]):
        cols = [pos for pos, i in enumerate(indexed) if group_labels[i] == lab]
        groups.append((lab, cols))
    base = float(np.mean([a.base_value for a in attrs]))
    return StackedForceData(feature_names=list(names), groups=groups,
                            phi_columns=phi_columns, model_outputs=outputs,
                            base_value=base)
