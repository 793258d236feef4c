"""Contrastive explanations: pertinent negatives and positives.

A pertinent negative (PN) is a minimal nonnegative addition to an
instance that flips the predicted class; a pertinent positive (PP) is a
minimal retained part of the instance that alone preserves the class.
Both solve an elastic-net-penalized hinge on the logit margin with an
accelerated proximal-gradient inner loop and an outer search over the
hinge weight c: successful rounds halve c to push sparsity, failed
rounds multiply it by 10.

Everything runs in logit space; probability space saturates near 0/1
and kills gradients exactly where contrastive questions get asked.
"""

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .numopt import ProxConfig, fista_minimize

PN = "PN"
PP = "PP"


@dataclass
class CemConfig:
    mode: str = PN
    kappa: float = 0.0        # required logit margin beyond the decision boundary
    beta: float = 0.1         # L1 weight
    c_init: float = 10.0
    c_search_steps: int = 9
    max_iterations: int = 1000
    step_size: float = 0.01

    def validate(self):
        if self.mode not in (PN, PP):
            raise ValueError(f"mode must be {PN} or {PP}")
        if self.kappa < 0 or self.beta < 0 or self.c_init <= 0:
            raise ValueError("kappa and beta must be >= 0 and c_init > 0")


@dataclass
class ContrastiveResult:
    mode: str
    delta: np.ndarray
    changed_features: list      # (name, original value, new value)
    prediction_before: dict     # {"class": int, "probabilities": [p0, p1]}
    prediction_after: dict
    converged: bool
    final_objective: float
    l1: float
    l2: float
    c_used: float | None = None


def pertinent_negative(model, x, cfg: CemConfig | None = None,
                       feature_names=None) -> ContrastiveResult:
    """Smallest found additive delta in [0, 1-x] that flips the class."""
    cfg = cfg or CemConfig(mode=PN)
    cfg.validate()
    return _search(model, x, cfg, mode=PN, feature_names=feature_names)


def pertinent_positive(model, x, cfg: CemConfig | None = None,
                       feature_names=None) -> ContrastiveResult:
    """Sparsest found delta in [0, x] classified like x on its own."""
    cfg = cfg or CemConfig(mode=PP)
    cfg.validate()
    return _search(model, x, cfg, mode=PP, feature_names=feature_names)


def _search(model, x, cfg, mode, feature_names):
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.size
    probs_before = nn.forward(model, x)[0]
    target = int(np.argmax(probs_before))
    n_out = model.n_outputs

    if mode == PN:
        lo, hi = np.zeros(d), 1.0 - x
        x0 = np.zeros(d)
    else:
        lo, hi = np.zeros(d), x.copy()
        x0 = x.copy()

    def point(delta):
        return x + delta if mode == PN else delta

    def margin_seed(other):
        seed = np.zeros(n_out)
        if mode == PN:
            seed[target] = 1.0   # hinge on target staying ahead: push it down
            seed[other] = -1.0
        else:
            seed[other] = 1.0    # hinge on target falling behind: push it up
            seed[target] = -1.0
        return seed

    def hinge_parts(delta):
        z = point(delta)
        logits = nn.logits(model, z)[0]
        order = np.argsort(logits)
        other = int(order[-1]) if order[-1] != target else int(order[-2])
        raw = logits[target] - logits[other]
        margin = raw if mode == PN else -raw
        flipped = int(np.argmax(logits)) != target
        return margin, other, flipped

    best = None  # (l1, objective, delta, c)

    def smooth_factory(c):
        def smooth(delta):
            margin, other, _ = hinge_parts(delta)
            val = c * max(margin, -cfg.kappa) + float(delta @ delta)
            grad = 2.0 * delta
            if margin > -cfg.kappa:
                _, g = nn.logit_combination_grad(model, point(delta), margin_seed(other))
                grad = grad + c * g
            return val, grad
        return smooth

    def consider(delta, c):
        nonlocal best
        margin, _, flipped = hinge_parts(delta)
        ok = flipped if mode == PN else not flipped
        if not ok:
            return False
        l1 = float(np.abs(delta).sum())
        obj = c * max(margin, -cfg.kappa) + float(delta @ delta) + cfg.beta * l1
        if best is None or (l1, obj) < (best[0], best[1]):
            best = (l1, obj, delta.copy(), c)
        return True

    c = cfg.c_init
    prox = ProxConfig(max_iter=cfg.max_iterations, step_size=cfg.step_size, tol=1e-7)
    # The canonical start can stall when rectifier kinks point the margin
    # gradient into the box wall at delta = 0; a deterministic midpoint
    # start rescues those rounds without introducing randomness.
    fallback = (lo + hi) / 2.0
    for _ in range(cfg.c_search_steps):
        found_this_round = False

        def track(_it, delta):
            nonlocal found_this_round
            if consider(delta, c):
                found_this_round = True

        for start in (x0, fallback):
            if consider(start, c):
                found_this_round = True
            res = fista_minimize(smooth_factory(c), cfg.beta, (lo, hi), start,
                                 prox, callback=track)
            if consider(res.x, c):
                found_this_round = True
            if found_this_round:
                break
        c = c / 2.0 if found_this_round else c * 10.0

    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(d)]
    if best is not None:
        _, obj, delta, c_used = best
        converged = True
    else:
        delta = np.zeros(d) if mode == PN else x.copy()
        margin, _, _ = hinge_parts(delta)
        obj = cfg.c_init * max(margin, -cfg.kappa) + float(delta @ delta) + cfg.beta * float(np.abs(delta).sum())
        c_used = None
        converged = False

    after_point = point(delta)
    probs_after = nn.forward(model, after_point)[0]
    if mode == PN:
        changed = [
            (names[i], float(x[i]), float(x[i] + delta[i]))
            for i in np.flatnonzero(np.abs(delta) > 1e-6)
        ]
    else:
        changed = [
            (names[i], float(x[i]), float(delta[i]))
            for i in np.flatnonzero(np.abs(delta) > 1e-6)
        ]

    return ContrastiveResult(
        mode=mode,
        delta=delta,
        changed_features=changed,
        prediction_before={"class": target,
                           "probabilities": [float(p) for p in probs_before]},
        prediction_after={"class": int(np.argmax(probs_after)),
                          "probabilities": [float(p) for p in probs_after]},
        converged=converged,
        final_objective=float(obj),
        l1=float(np.abs(delta).sum()),
        l2=float(np.sqrt(delta @ delta)),
        c_used=c_used,
    )


@dataclass
class CemBatchStats:
    mode: str
    n_results: int
    success_rate: float
    feature_frequency: dict   # name -> fraction of results touching it
    mean_delta: dict          # name -> mean delta over results that touch it


def cem_batch_stats(results) -> CemBatchStats:
    """Aggregate per-feature change frequencies over many results."""
    if not results:
        raise ValueError("need at least one result")
    modes = {r.mode for r in results}
    if len(modes) != 1:
        raise ValueError(f"mixed modes in batch: {sorted(modes)}")
    counts = {}
    sums = {}
    for r in results:
        for name, old, new in r.changed_features:
            counts[name] = counts.get(name, 0) + 1
            sums[name] = sums.get(name, 0.0) + abs(new - old)
    n = len(results)
    return CemBatchStats(
        mode=modes.pop(),
        n_results=n,
        success_rate=sum(1 for r in results if r.converged) / n,
        feature_frequency={k: v / n for k, v in sorted(counts.items())},
        mean_delta={k: sums[k] / counts[k] for k in sorted(counts)},
    )
