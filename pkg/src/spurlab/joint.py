"""Exact finite joint distributions.

Dense-table representation of small discrete joints, the two-feature toy
process with a planted spurious feature, and random causal/anticausal
graph models with Dirichlet-drawn conditionals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12

GRAPH_KINDS = ("causal", "anticausal", "three_feature")

DEFAULT_AXIS_SIZES = {"x1": 2, "x2": 4, "x3": 2, "y": 2, "z": 3, "q": 3}


class DistributionError(ValueError):
    """Invalid probability table, configuration, or conditioning event."""


def _as_prob_array(probs: np.ndarray | Sequence) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.size == 0:
        raise DistributionError("empty probability table")
    if np.any(arr < 0):
        raise DistributionError("negative cell in probability table")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise DistributionError(f"probabilities sum to {total!r}, not 1")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class JointTable:
    """Dense joint distribution over named finite axes.

    Immutable after construction; cells are nonnegative and sum to one
    within 1e-12. Values of an axis are 0-based integer indices.
    """

    axis_names: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        arr = _as_prob_array(self.probs)
        object.__setattr__(self, "probs", arr)
        names = tuple(self.axis_names)
        object.__setattr__(self, "axis_names", names)
        if len(names) != arr.ndim:
            raise DistributionError(
                f"{len(names)} axis names for a {arr.ndim}-dimensional table"
            )
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate axis names: {names}")

    @property
    def axis_sizes(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis_index(self, name: str) -> int:
        try:
            return self.axis_names.index(name)
        except ValueError:
            raise DistributionError(
                f"unknown axis {name!r}; table has {self.axis_names}"
            ) from None

    def to_json(self) -> str:
        doc = {
            "axes": list(self.axis_names),
            "sizes": [int(s) for s in self.probs.shape],
            "probs": [float(p) for p in self.probs.ravel(order="C")],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "JointTable":
        doc = json.loads(text)
        arr = np.array(doc["probs"], dtype=np.float64).reshape(doc["sizes"], order="C")
        return cls(tuple(doc["axes"]), arr)


@dataclass(frozen=True)
class ToyConfig:
    """Parameters of the toy process: a 2-state spurious feature paired with
    a d2-state context feature whose central zone decouples the two.

    The zone holds m = round(2*nu*d2) consecutive context values centered
    at d2/2; inside it the spurious feature is uniform noise, outside it
    matches the label exactly, so the best spurious-only classifier has
    accuracy 1 - m/(2*d2), roughly 1 - nu.
    """

    d2: int
    nu: float

    def __post_init__(self):
        if not isinstance(self.d2, (int, np.integer)) or self.d2 < 4:
            raise DistributionError(f"d2 must be an integer >= 4, got {self.d2!r}")
        if not 0.0 <= self.nu <= 0.5:
            raise DistributionError(f"nu must lie in [0, 0.5], got {self.nu!r}")
        if len(self.zone) != self.zone_size:
            raise DistributionError(
                f"zone bookkeeping failed: |zone|={len(self.zone)} but m={self.zone_size} "
                f"(d2={self.d2}, nu={self.nu})"
            )

    @property
    def zone_size(self) -> int:
        return int(round(2.0 * self.nu * self.d2))

    @property
    def zone(self) -> tuple[int, ...]:
        """1-based context indices i with d2/2 - ceil(m/2) + 1 <= i <= d2/2 + floor(m/2)."""
        m = self.zone_size
        lo = self.d2 / 2 - math.ceil(m / 2) + 1
        hi = self.d2 / 2 + math.floor(m / 2)
        return tuple(i for i in range(1, self.d2 + 1) if lo <= i <= hi)

    def zone_mask(self) -> np.ndarray:
        """Boolean mask over 0-based context indices, True inside the zone."""
        mask = np.zeros(self.d2, dtype=bool)
        for i in self.zone:
            mask[i - 1] = True
        return mask

    def labels(self) -> np.ndarray:
        """Label per 0-based context index j: class (j+1) % 2 (even 1-based index -> 0)."""
        return (np.arange(1, self.d2 + 1) % 2).astype(np.int64)


def build_toy(config: ToyConfig) -> JointTable:
    """Exact joint over (x1, x2, y) for the toy process.

    Each context value is uniform with mass 1/d2 and determines the label by
    parity. Outside the zone the spurious feature copies the label; inside it
    is an independent fair coin.
    """
    d2 = config.d2
    probs = np.zeros((2, d2, 2), dtype=np.float64)
    labels = config.labels()
    in_zone = config.zone_mask()
    cell = 1.0 / d2
    for j in range(d2):
        y = labels[j]
        if in_zone[j]:
            probs[0, j, y] = cell / 2
            probs[1, j, y] = cell / 2
        else:
            probs[y, j, y] = cell
    return JointTable(("x1", "x2", "y"), probs)


def enumerate_support(config: ToyConfig) -> list[tuple[tuple[int, int], int, float]]:
    """Every positive-probability point as ((x1, x2), y, p), 0-based indices.

    Out-of-zone context values contribute one point each; in-zone values
    contribute both spurious states at half the mass. Ordered by context
    index then spurious state.
    """
    d2 = config.d2
    labels = config.labels()
    in_zone = config.zone_mask()
    points: list[tuple[tuple[int, int], int, float]] = []
    for j in range(d2):
        y = int(labels[j])
        if in_zone[j]:
            points.append(((0, j), y, 1.0 / (2 * d2)))
            points.append(((1, j), y, 1.0 / (2 * d2)))
        else:
            points.append(((y, j), y, 1.0 / d2))
    return points


def project(
    table: JointTable,
    keep_axes: Sequence[str] | str,
    condition: Mapping[str, int] | None = None,
) -> JointTable:
    """Exact marginal over `keep_axes`, optionally conditioned on axis=value.

    Raises DistributionError when conditioning on a zero-probability event
    or when an axis is both kept and conditioned.
    """
    if isinstance(keep_axes, str):
        keep_axes = (keep_axes,)
    keep = tuple(keep_axes)
    condition = dict(condition or {})
    overlap = set(keep) & set(condition)
    if overlap:
        raise DistributionError(f"axes both kept and conditioned on: {sorted(overlap)}")

    arr = table.probs
    names = list(table.axis_names)
    for name, value in condition.items():
        ax = names.index(name) if name in names else table.axis_index(name)
        size = arr.shape[ax]
        if not 0 <= value < size:
            raise DistributionError(f"condition {name}={value} outside 0..{size - 1}")
        arr = np.take(arr, value, axis=ax)
        names.pop(ax)

    for name in keep:
        if name not in names:
            table.axis_index(name)  # raises for unknown names
            raise DistributionError(f"axis {name!r} was consumed by the condition")
    drop = tuple(i for i, n in enumerate(names) if n not in keep)
    arr = arr.sum(axis=drop) if drop else arr
    names = [n for n in names if n in keep]
    arr = np.moveaxis(arr, [names.index(k) for k in keep], range(len(keep)))

    mass = float(arr.sum())
    if mass <= 0.0:
        raise DistributionError(f"conditioning event {condition} has zero probability")
    return JointTable(keep, arr / mass)


def sample(table: JointTable, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n i.i.d. outcome tuples by inverse CDF over the flattened table.

    Returns an (n, ndim) int64 array of axis indices; deterministic for a
    given generator state.
    """
    if n < 0:
        raise DistributionError(f"sample count must be >= 0, got {n}")
    flat = table.probs.ravel(order="C")
    cdf = np.cumsum(flat)
    cdf[-1] = 1.0
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, flat.size - 1)
    coords = np.unravel_index(idx, table.probs.shape)
    return np.stack(coords, axis=1).astype(np.int64)


@dataclass(frozen=True)
class GraphModel:
    """Ancestral graph model given by per-edge conditional tables.

    Conditional arrays are column-stochastic: component[child, *parents]
    sums to one over the child axis for every fixed parent combination.

    kinds and components:
      causal:        p_z, p_x1_given_z, p_x2_given_z, p_y_given_x2
      anticausal:    p_z, p_y_given_z, p_q_given_z, p_x1_given_y, p_x2_given_q
      three_feature: p_z, p_x1_given_z, p_x2_given_z, p_y_given_x2, p_x3_given_y

    In the causal kind the label is a noisy channel off the context feature
    x2 (the three_feature kind extends it with an extra label-generated
    feature x3); in the anticausal kind the label generates x1 directly.
    """

    kind: str
    components: dict[str, np.ndarray]
    axis_sizes: dict[str, int] = field(default_factory=dict)

    _REQUIRED = {
        "causal": ("p_z", "p_x1_given_z", "p_x2_given_z", "p_y_given_x2"),
        "anticausal": ("p_z", "p_y_given_z", "p_q_given_z", "p_x1_given_y", "p_x2_given_q"),
        "three_feature": ("p_z", "p_x1_given_z", "p_x2_given_z", "p_y_given_x2", "p_x3_given_y"),
    }

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise DistributionError(f"unknown graph kind {self.kind!r}")
        missing = [k for k in self._REQUIRED[self.kind] if k not in self.components]
        if missing:
            raise DistributionError(f"{self.kind} model missing components {missing}")
        comps = {}
        for name, arr in self.components.items():
            arr = np.asarray(arr, dtype=np.float64)
            if np.any(arr < 0):
                raise DistributionError(f"negative entry in component {name}")
            sums = arr.sum(axis=0)
            if np.any(np.abs(sums - 1.0) > PROB_TOL):
                raise DistributionError(f"component {name} columns do not sum to 1")
            arr = arr.copy()
            arr.flags.writeable = False
            comps[name] = arr
        object.__setattr__(self, "components", comps)

    def observable_axes(self) -> tuple[str, ...]:
        if self.kind == "three_feature":
            return ("x1", "x2", "x3", "y")
        return ("x1", "x2", "y")

    def expand(self, with_latent: bool = False) -> JointTable:
        """Exact joint over the observable axes; latents summed out.

        With `with_latent`, one latent axis is appended: z for causal and
        three_feature, q for anticausal (z always summed).
        """
        c = self.components
        if self.kind == "causal":
            probs = np.einsum(
                "z,az,bz,cb->abcz", c["p_z"], c["p_x1_given_z"], c["p_x2_given_z"],
                c["p_y_given_x2"],
            )
            axes = ("x1", "x2", "y", "z")
        elif self.kind == "anticausal":
            probs = np.einsum(
                "z,cz,qz,ac,bq->abcq", c["p_z"], c["p_y_given_z"], c["p_q_given_z"],
                c["p_x1_given_y"], c["p_x2_given_q"],
            )
            axes = ("x1", "x2", "y", "q")
        else:
            probs = np.einsum(
                "z,az,bz,db,cd->abcdz", c["p_z"], c["p_x1_given_z"], c["p_x2_given_z"],
                c["p_y_given_x2"], c["p_x3_given_y"],
            )
            axes = ("x1", "x2", "x3", "y", "z")
        if not with_latent:
            probs = probs.sum(axis=-1)
            axes = axes[:-1]
        return JointTable(axes, probs)


def _dirichlet_columns(rng: np.random.Generator, child: int, parents: int,
                       concentration: float) -> np.ndarray:
    rows = rng.dirichlet(np.full(child, concentration), size=parents)
    return rows.T.copy()  # (child, parents), column-stochastic


def random_graph_model(
    kind: str,
    axis_sizes: Mapping[str, int] | None = None,
    rng: np.random.Generator | None = None,
    concentration: float = 1.0,
) -> tuple[GraphModel, JointTable]:
    """Draw a graph model with symmetric-Dirichlet conditional columns.

    Returns the model and its expanded observable joint. Component draw
    order is fixed, so results are deterministic per generator state.
    """
    if kind not in GRAPH_KINDS:
        raise DistributionError(f"unknown graph kind {kind!r}")
    if concentration <= 0:
        raise DistributionError(f"concentration must be > 0, got {concentration}")
    if rng is None:
        rng = np.random.default_rng()
    sizes = dict(DEFAULT_AXIS_SIZES)
    sizes.update(axis_sizes or {})
    for name, size in sizes.items():
        if size < 2:
            raise DistributionError(f"axis {name} must have size >= 2, got {size}")

    nz, n1, n2, ny = sizes["z"], sizes["x1"], sizes["x2"], sizes["y"]
    comps: dict[str, np.ndarray] = {}
    comps["p_z"] = rng.dirichlet(np.full(nz, concentration))
    if kind == "causal":
        comps["p_x1_given_z"] = _dirichlet_columns(rng, n1, nz, concentration)
        comps["p_x2_given_z"] = _dirichlet_columns(rng, n2, nz, concentration)
        comps["p_y_given_x2"] = _dirichlet_columns(rng, ny, n2, concentration)
    elif kind == "anticausal":
        nq = sizes["q"]
        comps["p_y_given_z"] = _dirichlet_columns(rng, ny, nz, concentration)
        comps["p_q_given_z"] = _dirichlet_columns(rng, nq, nz, concentration)
        comps["p_x1_given_y"] = _dirichlet_columns(rng, n1, ny, concentration)
        comps["p_x2_given_q"] = _dirichlet_columns(rng, n2, nq, concentration)
    else:
        n3 = sizes["x3"]
        comps["p_x1_given_z"] = _dirichlet_columns(rng, n1, nz, concentration)
        comps["p_x2_given_z"] = _dirichlet_columns(rng, n2, nz, concentration)
        comps["p_y_given_x2"] = _dirichlet_columns(rng, ny, n2, concentration)
        comps["p_x3_given_y"] = _dirichlet_columns(rng, n3, ny, concentration)

    model = GraphModel(kind, comps, dict(sizes))
    return model, model.expand()


def map_axis(
    table: JointTable,
    axis: str,
    mapping: Sequence[int],
    new_size: int | None = None,
) -> JointTable:
    """Replace an axis by its image under a deterministic map, merging states.

    `mapping[v]` is the new index of old value v; the new axis keeps the
    old name.
    """
    ax = table.axis_index(axis)
    mapping_arr = np.asarray(mapping, dtype=np.int64)
    if mapping_arr.shape != (table.probs.shape[ax],):
        raise DistributionError("mapping length must equal the axis size")
    size = int(new_size) if new_size is not None else int(mapping_arr.max()) + 1
    if np.any(mapping_arr < 0) or np.any(mapping_arr >= size):
        raise DistributionError("mapping values outside the target range")
    moved = np.moveaxis(table.probs, ax, 0)
    out = np.zeros((size,) + moved.shape[1:])
    np.add.at(out, mapping_arr, moved)
    return JointTable(table.axis_names, np.moveaxis(out, 0, ax))


def random_joint_table(
    axis_names: Sequence[str],
    axis_sizes: Sequence[int],
    rng: np.random.Generator,
    concentration: float = 1.0,
) -> JointTable:
    """Joint table with cells drawn from one symmetric Dirichlet."""
    sizes = tuple(int(s) for s in axis_sizes)
    flat = rng.dirichlet(np.full(int(np.prod(sizes)), concentration))
    return JointTable(tuple(axis_names), flat.reshape(sizes))


def random_deterministic_label_table(
    sizes: tuple[int, int, int],
    rng: np.random.Generator,
    concentration: float = 1.0,
) -> JointTable:
    """Random (x1, x2, y) table whose label is a function of x2.

    The (x1, x2) marginal is Dirichlet; y = f(x2) for a uniformly drawn map
    that touches every label at least once when x2 is large enough.
    """
    n1, n2, ny = sizes
    base = rng.dirichlet(np.full(n1 * n2, concentration)).reshape(n1, n2)
    f = rng.integers(0, ny, size=n2)
    if n2 >= ny:
        f[rng.permutation(n2)[:ny]] = np.arange(ny)  # surjective when possible
    probs = np.zeros((n1, n2, ny))
    probs[:, np.arange(n2), f] = base
    return JointTable(("x1", "x2", "y"), probs)
