"""Boolean DNF rule learning by LP column generation, plus rule text IO.

The learned model predicts Attack when ANY conjunctive clause of
threshold/indicator literals fires. Training alternates a restricted
master LP over clause-inclusion variables (solved with the dense
simplex) with a beam-search pricing pass that proposes clauses of
negative reduced cost. Thresholds live in normalized [0,1] units on the
encoded columns.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import BINARY
from .errors import DataError
from .nn import metrics_from_predictions
from .numopt import LpProblem, simplex_lp

THRESHOLD_LE = "threshold_le"
THRESHOLD_GT = "threshold_gt"
IS_TRUE = "is_true"
IS_FALSE = "is_false"

RULES_HEADER = "predict attack if any:"


@dataclass(frozen=True)
class Literal:
    column: str
    form: str
    threshold: float | None = None
    text: str | None = None  # printed threshold form, kept for round-trips

    def render(self):
        if self.form == THRESHOLD_LE:
            return f"{self.column} <= {self._fmt()}"
        if self.form == THRESHOLD_GT:
            return f"{self.column} > {self._fmt()}"
        if self.form == IS_TRUE:
            return self.column
        return f"{self.column} not"

    def _fmt(self):
        if self.text is not None:
            return self.text
        return repr(float(self.threshold))


@dataclass(frozen=True)
class Clause:
    literals: tuple

    def render(self):
        return " AND ".join(lit.render() for lit in self.literals)

    def __len__(self):
        return len(self.literals)


@dataclass
class RuleSet:
    clauses: list
    lambda0: float = 1e-3
    lambda1: float = 1e-3
    provenance: str = "parsed"      # trained | parsed
    search_truncated: bool = False
    master_objective_trace: list = field(default_factory=list)
    clause_stats: list = field(default_factory=list)

    def render(self):
        lines = [RULES_HEADER]
        lines.extend(c.render() for c in self.clauses)
        return "\n".join(lines) + "\n"


@dataclass
class BrcgConfig:
    max_degree: int = 3
    beam_width: int = 10
    max_iterations: int = 25
    lambda0: float = 1e-3
    lambda1: float = 1e-3
    n_quantiles: int = 9  # deciles
    # few columns per round keeps the master's coverage-pattern space small
    clauses_per_iteration: int = 3

    def validate(self):
        if self.max_degree < 1 or self.beam_width < 1:
            raise ValueError("degree and beam width must be >= 1")


@dataclass
class BinarizedMatrix:
    bits: np.ndarray        # (rows, n_literals) bool
    literals: list
    schema_id: str

    @property
    def n_literals(self):
        return len(self.literals)


def eval_literal(column_values, lit: Literal) -> np.ndarray:
    v = np.asarray(column_values, dtype=np.float64)
    if lit.form == THRESHOLD_LE:
        return v <= lit.threshold
    if lit.form == THRESHOLD_GT:
        return v > lit.threshold
    if lit.form == IS_TRUE:
        return v > 0.5
    if lit.form == IS_FALSE:
        return v <= 0.5
    raise ValueError(f"unknown literal form {lit.form}")


def binarize(data, schema, cfg: BrcgConfig | None = None) -> BinarizedMatrix:
    """Candidate literal columns for every encoded feature.

    One-hot and binary-kind columns yield is_true/is_false; other numeric
    columns yield x<=q / x>q at each distinct decile q. Literals constant
    on the data are dropped.
    """
    cfg = cfg or BrcgConfig()
    values = np.asarray(data.values, dtype=np.float64)
    kind_by_feature = {f.name: f.kind for f in schema.features}
    indicator_cols = set()
    for feat, (start, size) in schema.groups.items():
        indicator_cols.update(range(start, start + size))
    for f in schema.features:
        if f.kind == BINARY:
            indicator_cols.add(schema.column_index[f.name])

    literals = []
    columns = []
    qs = np.linspace(0.1, 0.9, cfg.n_quantiles)
    for j, name in enumerate(schema.encoded_columns):
        col = values[:, j]
        if col.min() == col.max():
            continue
        if j in indicator_cols:
            cands = [Literal(name, IS_TRUE), Literal(name, IS_FALSE)]
        else:
            thresholds = sorted(set(np.quantile(col, qs).tolist()))
            cands = []
            for t in thresholds:
                if t >= col.max():
                    continue  # <= t all-true, > t all-false
                cands.append(Literal(name, THRESHOLD_LE, threshold=float(t)))
                cands.append(Literal(name, THRESHOLD_GT, threshold=float(t)))
        for lit in cands:
            bits = eval_literal(col, lit)
            if bits.all() or not bits.any():
                continue
            literals.append(lit)
            columns.append(bits)

    bits = np.column_stack(columns) if columns else np.zeros((values.shape[0], 0), dtype=bool)
    return BinarizedMatrix(bits=bits, literals=literals, schema_id=data.schema_id)


# ---------------------------------------------------------------------------
# training


def train_brcg(bin_matrix: BinarizedMatrix, labels, cfg: BrcgConfig | None = None) -> RuleSet:
    """Column generation over clauses; returns rounded, pruned rules.

    Master LP (clause variables relaxed to [0,1], one slack per positive
    row): minimize uncovered-positive slack + covered-negative count +
    per-clause lambda0 + lambda1*length. Pricing beam-searches literal
    conjunctions for the most negative reduced cost.
    """
    cfg = cfg or BrcgConfig()
    cfg.validate()
    y = np.asarray(labels, dtype=np.int64)
    bits = bin_matrix.bits
    if bits.shape[0] != y.size:
        raise ValueError("labels length does not match the binarized rows")

    # Aggregate identical rows: the LP and the pricing only see patterns.
    uniq, inverse = np.unique(bits, axis=0, return_inverse=True)
    pos_counts = np.bincount(inverse[y == 1], minlength=uniq.shape[0]).astype(np.float64)
    neg_counts = np.bincount(inverse[y == 0], minlength=uniq.shape[0]).astype(np.float64)

    clauses = []
    coverage = np.zeros((uniq.shape[0], 0), dtype=bool)
    trace = []
    truncated = False

    w_values = np.zeros(0)
    for it in range(cfg.max_iterations):
        w_values, duals_per_unique, objective = _solve_master(
            coverage, pos_counts, neg_counts, clauses, cfg)
        trace.append(objective)
        new_clauses = _price_clauses(uniq, pos_counts, neg_counts,
                                     duals_per_unique, bin_matrix.literals, cfg)
        new_clauses = [c for c in new_clauses if c not in clauses]
        if not new_clauses:
            break
        for c in new_clauses:
            coverage = np.column_stack([coverage, _clause_coverage(uniq, c, bin_matrix.literals)])
            clauses.append(c)
    else:
        truncated = True
        w_values, duals_per_unique, objective = _solve_master(
            coverage, pos_counts, neg_counts, clauses, cfg)
        trace.append(objective)

    selected = _round_greedy(clauses, w_values, uniq, pos_counts, neg_counts,
                             bin_matrix.literals)
    selected = _prune(selected, uniq, pos_counts, neg_counts, bin_matrix.literals)

    stats = []
    for c in selected:
        cov = _clause_coverage(uniq, c, bin_matrix.literals)
        stats.append({
            "clause": c.render(),
            "covered_positives": int(pos_counts[cov].sum()),
            "covered_negatives": int(neg_counts[cov].sum()),
        })
    return RuleSet(clauses=selected, lambda0=cfg.lambda0, lambda1=cfg.lambda1,
                   provenance="trained", search_truncated=truncated,
                   master_objective_trace=trace, clause_stats=stats)


def _clause_coverage(uniq_bits, clause: Clause, literals):
    lit_index = {lit: i for i, lit in enumerate(literals)}
    cov = np.ones(uniq_bits.shape[0], dtype=bool)
    for lit in clause.literals:
        cov &= uniq_bits[:, lit_index[lit]]
    return cov


def _solve_master(coverage, pos_counts, neg_counts, clauses, cfg):
    """Restricted master over clause weights in [0,1] plus per-positive slacks.

    minimize  sum_g n_g xi_g + sum_k cost_k w_k
    s.t.      xi_g + sum_k cov_gk w_k >= 1   (one row per positive pattern)

    Solved through its LP dual, which has only one row per clause:

    maximize  sum_g mu_g - sum_k s_k
    s.t.      (cov^T mu)_k - s_k <= cost_k,   0 <= mu_g <= n_g,  s_k >= 0.

    The dual variables mu feed the pricing pass directly; the dual's row
    duals recover the primal clause weights, and strong duality makes the
    reported objective the true master optimum.
    """
    pos_rows = np.flatnonzero(pos_counts > 0)
    K = len(clauses)
    if pos_rows.size == 0:
        # no positives: all-zero weights are optimal, duals are zero
        return np.zeros(K), np.zeros(coverage.shape[0]), 0.0

    cov_pos = coverage[pos_rows]  # (P, K) bool
    if K:
        patterns, group_of = np.unique(cov_pos, axis=0, return_inverse=True)
    else:
        patterns = np.zeros((1, 0), dtype=bool)
        group_of = np.zeros(pos_rows.size, dtype=int)
    G = patterns.shape[0]
    group_weight = np.bincount(group_of, weights=pos_counts[pos_rows], minlength=G)

    if K == 0:
        # every positive pattern pays its slack: mu at the upper bound
        duals_per_unique = np.zeros(coverage.shape[0])
        duals_per_unique[pos_rows] = pos_counts[pos_rows]
        return np.zeros(0), duals_per_unique, float(group_weight.sum())

    clause_cost = np.array([
        float(neg_counts[coverage[:, k]].sum())
        + cfg.lambda0 + cfg.lambda1 * len(clauses[k])
        for k in range(K)
    ])

    # dual vars: [mu_g (G), s_k (K)]; K rows keep the tableau small even
    # when thousands of positive patterns exist
    n = G + K
    c = np.concatenate([-np.ones(G), np.ones(K)])  # min -(sum mu - sum s)
    A = np.zeros((K, n))
    A[:, :G] = patterns.T.astype(np.float64)
    A[:, G:] = -np.eye(K)
    lower = np.zeros(n)
    upper = np.concatenate([group_weight, np.full(K, np.inf)])
    sol = simplex_lp(LpProblem(c=c, A=A, b=clause_cost, senses=["<="] * K,
                               lower=lower, upper=upper))
    if sol.status != "optimal":
        raise RuntimeError(f"master LP unexpectedly {sol.status}")

    # for <= rows of a min problem the row duals are <= 0; w = -dual
    w_values = np.clip(-sol.dual, 0.0, 1.0)
    mu_groups = sol.x[:G]
    duals_per_unique = np.zeros(coverage.shape[0])
    for g in range(G):
        rows_g = pos_rows[group_of == g]
        total = group_weight[g]
        if total > 0:
            duals_per_unique[rows_g] = mu_groups[g] * pos_counts[rows_g] / total
    objective = float(-sol.objective)  # dual max value == primal optimum
    return w_values, duals_per_unique, objective


def _price_clauses(uniq, pos_counts, neg_counts, duals, literals, cfg):
    """Beam search for conjunctions with negative reduced cost.

    reduced cost = lambda0 + lambda1*len + covered-negative count
                   - covered-positive dual mass
    """
    L = len(literals)
    if L == 0:
        return []
    lit_cols = [uniq[:, i] for i in range(L)]
    used_col = [lit.column for lit in literals]

    def rc(cov, length):
        return (cfg.lambda0 + cfg.lambda1 * length
                + float(neg_counts[cov].sum()) - float(duals[cov].sum()))

    # depth 1
    scored = []
    for i in range(L):
        cov = lit_cols[i]
        scored.append((rc(cov, 1), (i,), cov))
    scored.sort(key=lambda t: (t[0], t[1]))
    beam = scored[: cfg.beam_width]
    found = {t[1]: t[0] for t in scored if t[0] < -1e-9}

    for _depth in range(2, cfg.max_degree + 1):
        extensions = []
        for _, idxs, cov in beam:
            cols_in_use = {used_col[i] for i in idxs}
            for j in range(idxs[-1] + 1, L):
                if used_col[j] in cols_in_use:
                    continue
                cov2 = cov & lit_cols[j]
                if not cov2.any():
                    continue
                idxs2 = idxs + (j,)
                extensions.append((rc(cov2, len(idxs2)), idxs2, cov2))
        if not extensions:
            break
        extensions.sort(key=lambda t: (t[0], t[1]))
        beam = extensions[: cfg.beam_width]
        for score, idxs2, _ in extensions:
            if score < -1e-9:
                prev = found.get(idxs2)
                if prev is None or score < prev:
                    found[idxs2] = score

    ranked = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))
    return [Clause(tuple(literals[i] for i in idxs))
            for idxs, _ in ranked[: cfg.clauses_per_iteration]]


def _training_error(clause_list, uniq, pos_counts, neg_counts, literals):
    fired = np.zeros(uniq.shape[0], dtype=bool)
    for c in clause_list:
        fired |= _clause_coverage(uniq, c, literals)
    return pos_counts[~fired].sum() + neg_counts[fired].sum()


def _round_greedy(clauses, w_values, uniq, pos_counts, neg_counts, literals):
    """LP weights above 1/2 are taken outright; the rest join greedily by
    descending weight while they strictly reduce training error (fully
    fractional optima would otherwise round to an empty rule set)."""
    selected = [c for c, w in zip(clauses, w_values) if w > 0.5]
    err = _training_error(selected, uniq, pos_counts, neg_counts, literals)
    rest = sorted(
        (k for k, w in enumerate(w_values) if 1e-9 < w <= 0.5),
        key=lambda k: (-w_values[k], k),
    )
    for k in rest:
        trial = selected + [clauses[k]]
        trial_err = _training_error(trial, uniq, pos_counts, neg_counts, literals)
        if trial_err < err:
            selected = trial
            err = trial_err
    return selected


def _prune(selected, uniq, pos_counts, neg_counts, literals):
    """Drop clauses whose removal does not increase training error."""

    def error(clause_list):
        return _training_error(clause_list, uniq, pos_counts, neg_counts, literals)

    kept = list(selected)
    improved = True
    while improved:
        improved = False
        base = error(kept)
        for i in range(len(kept)):
            trial = kept[:i] + kept[i + 1 :]
            if error(trial) <= base:
                kept = trial
                improved = True
                break
    return kept


# ---------------------------------------------------------------------------
# evaluation


def evaluate_rules(rules: RuleSet, data, schema) -> tuple:
    """(predictions, Metrics) of a rule set on an encoded matrix."""
    values = np.asarray(data.values, dtype=np.float64)
    fired = np.zeros(values.shape[0], dtype=bool)
    for clause in rules.clauses:
        cov = np.ones(values.shape[0], dtype=bool)
        for lit in clause.literals:
            j = schema.column_index.get(lit.column)
            if j is None:
                raise DataError(f"rule references unknown column '{lit.column}'")
            cov &= eval_literal(values[:, j], lit)
        fired |= cov
    predictions = fired.astype(np.uint8)
    metrics = metrics_from_predictions(np.asarray(data.labels, dtype=np.int64),
                                       predictions)
    return predictions, metrics


# ---------------------------------------------------------------------------
# rule text grammar


_LIT_RE = re.compile(
    r"^(?P<name>\S+)(?:"
    r" (?P<op><=|>) (?P<num>-?\d+(?:\.\d+)?)"
    r"|(?P<not> not)"
    r")?$"
)


def parse_rules(text) -> RuleSet:
    """Parse the rule grammar; round-trips through RuleSet.render().

    Grammar: optional header line, then one clause per line, literals
    joined by " AND "; a literal is `name <= DEC`, `name > DEC`, `name`,
    or `name not`.
    """
    clauses = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.lower() == RULES_HEADER:
            continue
        literals = []
        for col, part in _split_clause(line):
            m = _LIT_RE.match(part)
            if not m:
                raise DataError(f"rule syntax error at line {lineno}, col {col}: {part!r}")
            name = m.group("name")
            if m.group("op") == "<=":
                literals.append(Literal(name, THRESHOLD_LE,
                                        threshold=float(m.group("num")),
                                        text=m.group("num")))
            elif m.group("op") == ">":
                literals.append(Literal(name, THRESHOLD_GT,
                                        threshold=float(m.group("num")),
                                        text=m.group("num")))
            elif m.group("not"):
                literals.append(Literal(name, IS_FALSE))
            else:
                literals.append(Literal(name, IS_TRUE))
        clauses.append(Clause(tuple(literals)))
    return RuleSet(clauses=clauses, provenance="parsed")


def _split_clause(line):
    col = 1
    for part in line.split(" AND "):
        yield col, part
        col += len(part) + len(" AND ")
