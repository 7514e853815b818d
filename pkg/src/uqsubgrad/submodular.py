"""Theta-parametrized submodular set functions (s-t cut), the Lovasz extension,
rounding of continuous optima back to discrete cuts, and a brute-force oracle.

Set convention
--------------
All subsets of the ground set (the non-terminal nodes) denote the nodes that
are grouped with the *sink*: the cut induced by S puts S ∪ {t} on the sink
side and everything else with the source. Continuous relaxation variables
inherit this meaning, so x_i = 1 cuts node i away from the source. This is the
convention under which the chain demo graph's closed-form relaxation and its
optimal-set switch at theta = 2 come out right.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

BRUTE_FORCE_CAP = 20


@dataclass(frozen=True)
class CutGraph:
    """Weighted digraph with distinguished source and sink.

    Edge weights are affine in theta: w(theta) = base + slope * theta.
    Nonnegativity over ``theta_range`` is checked at construction (affine
    weights attain extremes at the endpoints).
    """

    nodes: tuple[str, ...]
    source: str
    sink: str
    edges: tuple[tuple[str, str, float, float], ...]
    theta_range: tuple[float, float]

    def __post_init__(self):
        if self.source == self.sink:
            raise ValueError("source and sink must differ")
        if self.source not in self.nodes or self.sink not in self.nodes:
            raise ValueError("source and sink must be listed among the nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        lo, hi = self.theta_range
        for u, v, base, slope in self.edges:
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown node")
            if min(base + slope * lo, base + slope * hi) < 0:
                raise ValueError(
                    f"edge ({u!r}, {v!r}) weight goes negative on the support"
                )

    @property
    def ground_set(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in (self.source, self.sink))


def edge_weights(g: CutGraph, theta: float) -> list[float]:
    return [base + slope * theta for _, _, base, slope in g.edges]


def cut_value(g: CutGraph, S: Iterable[str], theta: float) -> float:
    """Value of the s-t cut whose sink side is S ∪ {sink}.

    Sums w(theta) over directed edges leaving the source side.
    """
    lo, hi = g.theta_range
    if not (lo - 1e-12 <= theta <= hi + 1e-12):
        raise ValueError(f"theta={theta} outside range [{lo}, {hi}]")
    members = frozenset(S)
    unknown = members - set(g.ground_set)
    if unknown:
        raise ValueError(f"not in the ground set: {sorted(unknown)}")
    sink_side = members | {g.sink}
    total = 0.0
    for u, v, base, slope in g.edges:
        if u not in sink_side and v in sink_side:
            total += base + slope * theta
    return total


@dataclass(frozen=True)
class SetFunctionSpec:
    """A theta-parametrized set function on an ordered ground set."""

    ground_set: tuple[str, ...]
    evaluator: Callable[[frozenset, float], float]

    @property
    def n(self) -> int:
        return len(self.ground_set)


def set_function(g: CutGraph) -> SetFunctionSpec:
    """The cut function of ``g`` under the sink-side convention (submodular)."""
    return SetFunctionSpec(g.ground_set, lambda S, theta: cut_value(g, S, theta))


@dataclass(frozen=True)
class DiscreteSolution:
    members: frozenset
    value: float


def _chain_sets(spec: SetFunctionSpec, order: np.ndarray) -> list[frozenset]:
    sets = [frozenset()]
    acc: set = set()
    for i in order:
        acc.add(spec.ground_set[int(i)])
        sets.append(frozenset(acc))
    return sets


def _check_unit_box(x: np.ndarray):
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("coordinates must lie in [0, 1]")


def lovasz_eval(spec: SetFunctionSpec, x: Sequence[float], theta: float) -> float:
    """Lovasz extension by the greedy chain: sort coordinates descending
    (ties by ascending index), evaluate the set function along the induced
    chain and combine with the chain weights. Agrees with the set function
    exactly on hypercube vertices.
    """
    xv = np.asarray(x, dtype=float)
    _check_unit_box(xv)
    order = np.argsort(-xv, kind="stable")
    sets = _chain_sets(spec, order)
    xs = xv[order]
    # Chain weights: lambda_0 = 1 - x_(1), lambda_i = x_(i) - x_(i+1),
    # lambda_n = x_(n); they are >= 0 and sum to 1.
    lams = np.empty(len(xs) + 1)
    lams[0] = 1.0 - xs[0]
    lams[1:-1] = xs[:-1] - xs[1:]
    lams[-1] = xs[-1]
    total = 0.0
    for lam, S in zip(lams, sets):
        if lam != 0.0:
            total += lam * spec.evaluator(S, theta)
    return total


def lovasz_subgradient(
    spec: SetFunctionSpec, x: Sequence[float], theta: float
) -> np.ndarray:
    """Greedy vertex of the base polytope at x: g_i = f(S_i) - f(S_{i-1})
    along the descending-sort chain. A subgradient of the extension at x."""
    xv = np.asarray(x, dtype=float)
    _check_unit_box(xv)
    order = np.argsort(-xv, kind="stable")
    sets = _chain_sets(spec, order)
    fvals = [spec.evaluator(S, theta) for S in sets]
    g = np.empty(len(xv))
    for i, node_idx in enumerate(order):
        g[int(node_idx)] = fvals[i + 1] - fvals[i]
    return g


def threshold_round(
    x: Sequence[float], eps: float, ground: Sequence[str]
) -> frozenset:
    """{e_i : x_i >= 1 - eps}: the elements confidently on the sink side."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    xv = np.asarray(x, dtype=float)
    return frozenset(g for g, v in zip(ground, xv) if v >= 1.0 - eps)


def _lex_key(spec: SetFunctionSpec, S: frozenset) -> tuple:
    return tuple(sorted(spec.ground_set.index(e) for e in S))


def phi_round(
    spec: SetFunctionSpec, x: Sequence[float], theta: float
) -> DiscreteSolution:
    """Sweep thresholds phi over {0} ∪ {x_i} ∪ {1} and return the superlevel
    set {e_i : x_i >= phi} with the smallest set-function value (ties broken
    by lexicographically smallest index set)."""
    xv = np.asarray(x, dtype=float)
    _check_unit_box(xv)
    best = None
    for phi in sorted({0.0, 1.0, *map(float, xv)}):
        S = frozenset(g for g, v in zip(spec.ground_set, xv) if v >= phi)
        val = spec.evaluator(S, theta)
        key = (val, _lex_key(spec, S))
        if best is None or key < best[0]:
            best = (key, S, val)
    return DiscreteSolution(best[1], best[2])


def brute_force_min(spec: SetFunctionSpec, theta: float) -> DiscreteSolution:
    """Exhaustive minimum over all subsets of the ground set. Deterministic
    tie-break: lexicographically smallest index set."""
    if spec.n > BRUTE_FORCE_CAP:
        raise ValueError(f"ground set too large for brute force ({spec.n} > {BRUTE_FORCE_CAP})")
    best = None
    for r in range(spec.n + 1):
        for combo in combinations(range(spec.n), r):
            S = frozenset(spec.ground_set[i] for i in combo)
            val = spec.evaluator(S, theta)
            key = (val, combo)
            if best is None or key < best[0]:
                best = (key, S, val)
    return DiscreteSolution(best[1], best[2])


def min_cut_value_function(g: CutGraph) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized theta -> min-cut value, by exhaustive enumeration.

    Every subset's cut value is affine in theta, so the optimal value is the
    lower envelope of 2^n affine functions; the (base, slope) table is built
    once and reused for every evaluation (the trace reference needs this at
    many thetas).
    """
    ground = g.ground_set
    if len(ground) > BRUTE_FORCE_CAP:
        raise ValueError("ground set too large for brute force")
    bases, slopes = [], []
    for mask in range(2 ** len(ground)):
        S = frozenset(ground[i] for i in range(len(ground)) if mask >> i & 1)
        sink_side = S | {g.sink}
        b = s = 0.0
        for u, v, base, slope in g.edges:
            if u not in sink_side and v in sink_side:
                b += base
                s += slope
        bases.append(b)
        slopes.append(s)
    B = np.asarray(bases)
    S = np.asarray(slopes)

    def values(theta):
        t = np.asarray(theta, dtype=float)
        return np.min(B + S * t[..., None], axis=-1)

    return values


def verify_submodular(
    spec: SetFunctionSpec,
    theta: float,
    rng: np.random.Generator,
    trials: int = 16,
    tol: float = 1e-9,
) -> bool:
    """Spot-check f(X) + f(Y) >= f(X ∪ Y) + f(X ∩ Y) on random pairs."""
    ground = list(spec.ground_set)
    for _ in range(trials):
        X = frozenset(g for g in ground if rng.random() < 0.5)
        Y = frozenset(g for g in ground if rng.random() < 0.5)
        lhs = spec.evaluator(X, theta) + spec.evaluator(Y, theta)
        rhs = spec.evaluator(X | Y, theta) + spec.evaluator(X & Y, theta)
        if lhs < rhs - tol:
            return False
    return True


def demo_cut_graph(theta_range: tuple[float, float] = (0.0, 4.0)) -> CutGraph:
    """Three-edge chain s -> 1 -> 2 -> t with one uncertain weight:
    w(s,1) = theta, w(1,2) = 2, w(2,t) = 3. The optimal cut switches at
    theta = 2 (cut s->1 below, cut 1->2 above)."""
    return CutGraph(
        nodes=("s", "1", "2", "t"),
        source="s",
        sink="t",
        edges=(("s", "1", 0.0, 1.0), ("1", "2", 2.0, 0.0), ("2", "t", 3.0, 0.0)),
        theta_range=theta_range,
    )


# -- Edge-list ingestion -------------------------------------------------------
#
# Grammar (whitespace separated, '#' starts a comment):
#   source <name>
#   sink <name>
#   <from> <to> <base> <slope>     one line per edge, w(theta) = base + slope*theta


def parse_cut_graph(text: str, theta_range: tuple[float, float]) -> CutGraph:
    source = sink = None
    edges = []
    nodes: list[str] = []

    def note(name: str):
        if name not in nodes:
            nodes.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "source" and len(parts) == 2:
            source = parts[1]
            note(source)
        elif parts[0] == "sink" and len(parts) == 2:
            sink = parts[1]
            note(sink)
        elif len(parts) == 4:
            u, v, base, slope = parts[0], parts[1], float(parts[2]), float(parts[3])
            note(u)
            note(v)
            edges.append((u, v, base, slope))
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    if source is None or sink is None:
        raise ValueError("edge list must name a source and a sink")
    return CutGraph(tuple(nodes), source, sink, tuple(edges), theta_range)


def random_cut_graph(
    rng: np.random.Generator,
    n_internal: int,
    theta_range: tuple[float, float] = (0.0, 4.0),
    edge_prob: float = 0.5,
) -> CutGraph:
    """Random layered digraph for property tests: every internal node is
    reachable-ish between s and t, weights affine and nonnegative on the range."""
    names = tuple(str(i + 1) for i in range(n_internal))
    nodes = ("s",) + names + ("t",)
    lo, hi = theta_range
    edges = []

    def weight():
        base = rng.uniform(0.0, 3.0)
        slope = rng.uniform(-0.2, 0.5)
        # keep w(theta) >= 0 over the range
        if base + slope * lo < 0 or base + slope * hi < 0:
            slope = abs(slope)
        return base, slope

    for i, u in enumerate(nodes[:-1]):
        for v in nodes[i + 1 :]:
            if u == "s" and v == "t":
                continue
            if rng.random() < edge_prob:
                base, slope = weight()
                edges.append((u, v, base, slope))
    # guarantee connectivity of the chain
    for u, v in zip(nodes[:-1], nodes[1:]):
        if not any(e[0] == u and e[1] == v for e in edges):
            base, slope = weight()
            edges.append((u, v, base, slope))
    return CutGraph(nodes, "s", "t", tuple(edges), theta_range)
