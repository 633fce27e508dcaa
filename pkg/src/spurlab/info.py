"""Exact entropy, mutual information, and conditional-feature analysis.

Everything here is computed by enumeration over dense tables; nothing is
estimated from samples. Information is reported in bits (log base 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .joint import DistributionError, GraphModel, JointTable, project, random_graph_model

ROW_DECIMALS = 12  # rounding applied before grouping equal conditional rows
COND_THRESHOLD = 1e-8  # smallest/largest singular value ratio for recovery


class AssumptionError(DistributionError):
    """Input table violates a precondition of the check being run."""


class SingularRecovery(DistributionError):
    """Posterior recovery attempted with (numerically) dependent columns."""


def entropy(dist: np.ndarray | Sequence[float] | JointTable) -> float:
    """Shannon entropy in bits; 0*log(0) taken as 0."""
    if isinstance(dist, JointTable):
        p = dist.probs.ravel()
    else:
        p = np.asarray(dist, dtype=np.float64).ravel()
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise DistributionError("entropy input is not a probability vector")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _subset_entropy(table: JointTable, axes: Sequence[str]) -> float:
    if not axes:
        return 0.0
    drop = tuple(
        i for i, name in enumerate(table.axis_names) if name not in set(axes)
    )
    marg = table.probs.sum(axis=drop) if drop else table.probs
    return entropy(marg.ravel())


def mutual_information(
    table: JointTable,
    axes_a: Sequence[str] | str,
    axes_b: Sequence[str] | str,
    conditional_on: Sequence[str] | str | None = None,
) -> float:
    """Exact (conditional) mutual information I(A; B | C) in bits.

    Computed as H(AC) + H(BC) - H(ABC) - H(C); the three argument groups
    must be disjoint. Result can carry float residue down to about -1e-12.
    """
    a = (axes_a,) if isinstance(axes_a, str) else tuple(axes_a)
    b = (axes_b,) if isinstance(axes_b, str) else tuple(axes_b)
    if conditional_on is None:
        c: tuple[str, ...] = ()
    elif isinstance(conditional_on, str):
        c = (conditional_on,)
    else:
        c = tuple(conditional_on)
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise DistributionError(f"axis groups must be disjoint, got {a}, {b}, {c}")
    for name in groups:
        table.axis_index(name)
    return (
        _subset_entropy(table, a + c)
        + _subset_entropy(table, b + c)
        - _subset_entropy(table, a + b + c)
        - _subset_entropy(table, c)
    )


@dataclass(frozen=True)
class PiTable:
    """Conditional rows P(feature | context), one row per context value.

    Contexts are flattened row-major when there are several context axes.
    Rows at zero-marginal contexts are undefined (NaN, defined mask False).
    """

    rows: np.ndarray
    feature_axis: str
    context_axes: tuple[str, ...]
    context_sizes: tuple[int, ...]
    context_probs: np.ndarray
    defined: np.ndarray

    def n_states(self) -> int:
        """Number of distinct rows among defined contexts (rounded comparison)."""
        ids, _ = _group_rows(self.rows, self.defined)
        return int(ids.max()) + 1 if ids.size and ids.max() >= 0 else 0


def _reorganize(table: JointTable, feature: str, context: Sequence[str]):
    """View the table as (context_flat, feature, rest_flat) plus bookkeeping."""
    context = tuple(context)
    names = table.axis_names
    rest = tuple(n for n in names if n != feature and n not in context)
    order = [table.axis_index(n) for n in context + (feature,) + rest]
    arr = np.transpose(table.probs, order)
    ctx_sizes = arr.shape[: len(context)]
    n_feat = arr.shape[len(context)]
    rest_sizes = arr.shape[len(context) + 1 :]
    block = arr.reshape(int(np.prod(ctx_sizes)), n_feat, int(np.prod(rest_sizes)) or 1)
    return block, ctx_sizes, rest, rest_sizes


def compute_pi(
    table: JointTable, feature: str = "x1", context: Sequence[str] | str = ("x2",)
) -> PiTable:
    """Exact conditional distribution of `feature` given the context axes."""
    if isinstance(context, str):
        context = (context,)
    block, ctx_sizes, _, _ = _reorganize(table, feature, context)
    joint_fc = block.sum(axis=2)  # (n_ctx, n_feat)
    ctx_probs = joint_fc.sum(axis=1)
    defined = ctx_probs > 0
    rows = np.full_like(joint_fc, np.nan)
    rows[defined] = joint_fc[defined] / ctx_probs[defined, None]
    return PiTable(
        rows=rows,
        feature_axis=feature,
        context_axes=tuple(context),
        context_sizes=tuple(int(s) for s in ctx_sizes),
        context_probs=ctx_probs,
        defined=defined,
    )


def _group_rows(rows: np.ndarray, defined: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group equal (rounded) rows; returns (state id per context, state rows).

    States are numbered by first occurrence; undefined contexts get id -1.
    """
    ids = np.full(rows.shape[0], -1, dtype=np.int64)
    seen: dict[tuple, int] = {}
    reps: list[np.ndarray] = []
    for r in range(rows.shape[0]):
        if not defined[r]:
            continue
        key = tuple(np.round(rows[r], ROW_DECIMALS))
        if key not in seen:
            seen[key] = len(reps)
            reps.append(rows[r])
        ids[r] = seen[key]
    states = np.array(reps) if reps else np.empty((0, rows.shape[1]))
    return ids, states


def pi_as_variable(
    table: JointTable, feature: str = "x1", context: Sequence[str] | str = ("x2",)
) -> JointTable:
    """Joint over (pi, feature, remaining axes) with the context collapsed
    into discrete states of the conditional row P(feature | context).

    Context values whose rows agree componentwise (after rounding to 12
    decimals) share a state, so the result is the induced distribution of
    the conditional itself viewed as a random variable.
    """
    if isinstance(context, str):
        context = (context,)
    pi = compute_pi(table, feature, context)
    ids, states = _group_rows(pi.rows, pi.defined)
    n_states = states.shape[0]
    if n_states == 0:
        raise DistributionError("no context value has positive probability")
    block, _, rest, rest_sizes = _reorganize(table, feature, context)
    out = np.zeros((n_states,) + block.shape[1:])
    np.add.at(out, ids[pi.defined], block[pi.defined])
    out = out.reshape((n_states, block.shape[1]) + tuple(rest_sizes))
    return JointTable(("pi", feature) + rest, out)


def pi_states(table: JointTable, feature: str = "x1",
              context: Sequence[str] | str = ("x2",)) -> np.ndarray:
    """Distinct conditional rows (the support of the pi variable)."""
    if isinstance(context, str):
        context = (context,)
    pi = compute_pi(table, feature, context)
    _, states = _group_rows(pi.rows, pi.defined)
    return states


def pi_per_feature(table: JointTable, i: int, label: str = "y"):
    """Conditional-of-feature-i analysis for a table over (x1..xL, label).

    The context is every other feature axis (the label is excluded).
    Returns the PiTable and I(pi_i; label) in bits.
    """
    features = tuple(n for n in table.axis_names if n != label)
    if len(features) < 2:
        raise DistributionError("need at least two feature axes")
    if not 1 <= i <= len(features):
        raise DistributionError(f"feature index {i} outside 1..{len(features)}")
    feature = features[i - 1]
    context = tuple(n for n in features if n != feature)
    pi = compute_pi(table, feature, context)
    joint = pi_as_variable(table, feature, context)
    mi = mutual_information(joint, ("pi",), (label,))
    return pi, mi


@dataclass
class CheckReport:
    """Outcome of a numerical theorem check over one or more trials."""

    check: str
    trials: int
    max_violation: float
    failing_seeds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "trials": self.trials,
            "max_violation": float(self.max_violation),
            "failing_seeds": list(self.failing_seeds),
        }


def _as_table_list(tables) -> list:
    if isinstance(tables, (JointTable, GraphModel)):
        return [tables]
    return list(tables)


def _sweep(name: str, items, violation_fn, seeds=None, tol: float = 1e-9) -> CheckReport:
    items = _as_table_list(items)
    if seeds is None:
        seeds = list(range(len(items)))
    seeds = list(seeds)
    if len(seeds) != len(items):
        raise DistributionError("seeds and inputs differ in length")
    max_v = 0.0
    failing = []
    for seed, item in zip(seeds, items):
        v = float(violation_fn(item))
        if v > max_v:
            max_v = v
        if v > tol:
            failing.append(seed)
    return CheckReport(name, len(items), max_v, failing)


def check_lemma1(tables, seeds=None, tol: float = 1e-9) -> CheckReport:
    """|I(x1; pi) - I(x1; x2)| on each table; the two should be equal."""

    def violation(table: JointTable) -> float:
        mi_raw = mutual_information(table, ("x1",), ("x2",))
        joint = pi_as_variable(table, "x1", ("x2",))
        mi_pi = mutual_information(joint, ("x1",), ("pi",))
        return abs(mi_pi - mi_raw)

    return _sweep("lemma1", tables, violation, seeds, tol)


def _theorem1_violation(table: JointTable) -> float:
    mi_x1 = mutual_information(table, ("x1",), ("y",))
    joint = pi_as_variable(table, "x1", ("x2",))
    mi_pi = mutual_information(joint, ("pi",), ("y",))
    return max(0.0, mi_x1 - mi_pi)


def check_theorem1(tables, seeds=None, tol: float = 1e-9) -> CheckReport:
    """max(0, I(x1;y) - I(pi;y)) on tables where the context determines y.

    Rejects tables with H(y | x2) >= 1e-9 (the deterministic-label
    assumption the theorem needs).
    """

    def violation(table: JointTable) -> float:
        h_y_given_x2 = _subset_entropy(table, ("x2", "y")) - _subset_entropy(
            table, ("x2",)
        )
        if h_y_given_x2 >= 1e-9:
            raise AssumptionError(
                f"label not a deterministic function of the context: "
                f"H(y|x2) = {h_y_given_x2:.3e} bits"
            )
        return _theorem1_violation(table)

    return _sweep("theorem1", tables, violation, seeds, tol)


def check_theorem3(models, seeds=None, tol: float = 1e-9) -> CheckReport:
    """Theorem-1 inequality on causal graph models (no deterministic label)."""

    def violation(model: GraphModel) -> float:
        if model.kind != "causal":
            raise AssumptionError(f"expected a causal model, got {model.kind!r}")
        return _theorem1_violation(model.expand())

    return _sweep("theorem3", models, violation, seeds, tol)


def recover_posterior_anticausal(
    M: np.ndarray, pi_row: np.ndarray, cond_threshold: float = COND_THRESHOLD
) -> np.ndarray:
    """Solve M q = pi_row for the label posterior behind a conditional row.

    M is the column-stochastic P(x1 | y). Least squares, then clamping to
    [0, 1] and renormalization; exact when pi_row lies in the column span.
    """
    M = np.asarray(M, dtype=np.float64)
    pi_row = np.asarray(pi_row, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise SingularRecovery(
            f"need at least as many feature states as labels, got {M.shape}"
        )
    svals = np.linalg.svd(M, compute_uv=False)
    if svals[0] <= 0 or svals[-1] / svals[0] <= cond_threshold:
        raise SingularRecovery(
            f"columns numerically dependent (singular value ratio "
            f"{svals[-1] / svals[0] if svals[0] > 0 else 0:.2e})"
        )
    q, *_ = np.linalg.lstsq(M, pi_row, rcond=None)
    q = np.clip(q, 0.0, 1.0)
    total = q.sum()
    if total <= 0:
        raise SingularRecovery("recovered posterior has zero mass")
    return q / total


def _quantize_columns(cols: np.ndarray, levels: int) -> np.ndarray:
    """Snap stochastic columns to multiples of 1/levels, then renormalize."""
    q = np.round(cols * levels) / levels
    return q / q.sum(axis=0)


def search_pi_ordering(
    trials: int,
    master_seed: int = 0,
    axis_sizes=None,
    concentration: float = 1.0,
    levels: int = 2,
    margin: float = 1e-9,
) -> dict:
    """Randomized hunt for a model where the label-generated extra feature's
    conditional beats the first feature's: I(pi_3; y) > I(pi_1; y).

    Draws three-feature models whose x1-mechanism columns are quantized so
    that conditional rows can genuinely collide (under continuous draws the
    first feature's conditional is a.s. lossless and the two sides tie).
    Stops at the first instance exceeding `margin`; reports it and the
    number of draws used.
    """
    if trials < 1:
        raise DistributionError("search needs at least one trial")
    for draw in range(trials):
        rng = np.random.default_rng((master_seed, draw))
        model, _ = random_graph_model("three_feature", axis_sizes, rng, concentration)
        comps = dict(model.components)
        comps["p_x1_given_z"] = _quantize_columns(comps["p_x1_given_z"], levels)
        table = GraphModel("three_feature", comps, model.axis_sizes).expand()
        _, mi1 = pi_per_feature(table, 1)
        _, mi3 = pi_per_feature(table, 3)
        if mi3 > mi1 + margin:
            return {
                "found": True,
                "seed": draw,
                "mi_pi1_bits": float(mi1),
                "mi_pi3_bits": float(mi3),
                "draws_used": draw + 1,
            }
    return {"found": False, "seed": None, "mi_pi1_bits": None,
            "mi_pi3_bits": None, "draws_used": trials}


def check_theorem4(models, seeds=None, mi_tol: float = 1e-9,
                   recovery_tol: float = 1e-6) -> tuple[CheckReport, CheckReport]:
    """Anticausal identity I(pi;y) = I(x2;y) plus posterior recovery error.

    Returns two reports: the mutual-information gap and the max infinity-norm
    error of the recovered P(y | x2) over all context values.
    """
    models = _as_table_list(models)
    if seeds is None:
        seeds = list(range(len(models)))
    seeds = list(seeds)
    mi_report = CheckReport("theorem4_mi", len(models), 0.0)
    rec_report = CheckReport("theorem4_recovery", len(models), 0.0)
    for seed, model in zip(seeds, models):
        if model.kind != "anticausal":
            raise AssumptionError(f"expected an anticausal model, got {model.kind!r}")
        table = model.expand()
        M = model.components["p_x1_given_y"]
        joint = pi_as_variable(table, "x1", ("x2",))
        mi_gap = abs(
            mutual_information(joint, ("pi",), ("y",))
            - mutual_information(table, ("x2",), ("y",))
        )
        pi = compute_pi(table, "x1", ("x2",))
        worst = 0.0
        for r in range(pi.rows.shape[0]):
            if not pi.defined[r]:
                continue
            q = recover_posterior_anticausal(M, pi.rows[r])
            truth = project(table, ("y",), {"x2": r}).probs
            worst = max(worst, float(np.max(np.abs(q - truth))))
        if mi_gap > mi_report.max_violation:
            mi_report.max_violation = mi_gap
        if mi_gap > mi_tol:
            mi_report.failing_seeds.append(seed)
        if worst > rec_report.max_violation:
            rec_report.max_violation = worst
        if worst > recovery_tol:
            rec_report.failing_seeds.append(seed)
    return mi_report, rec_report
