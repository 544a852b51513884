"""Composite cluster sampling over candidacy-graph labelings, plus exact oracles."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import CandidacyGraph, EdgeKind
from .posterior import (
    IncrementalScorer,
    MatchState,
    PriorParams,
    derive_state,
    log_posterior,
    scale_bins,
)

ORACLE_MAX_VERTICES = 24
ENUMERATE_MAX_VERTICES = 16


class GraphTooLargeError(ValueError):
    pass


class UniformStream:
    """Buffered uniforms from a PCG64 generator; cheap per-draw in Python loops."""

    def __init__(self, seed: int | np.random.SeedSequence, block: int = 4096):
        self.gen = np.random.Generator(np.random.PCG64(seed))
        self.block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.gen.random(self.block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def randrange(self, n: int) -> int:
        return min(int(self.random() * n), n - 1)


def _as_stream(rng) -> UniformStream:
    if isinstance(rng, UniformStream) or hasattr(rng, "randrange"):
        return rng
    if isinstance(rng, np.random.Generator):
        # reuse the caller's generator so its state advances as usual
        stream = UniformStream(0)
        stream.gen = rng
        return stream
    return UniformStream(rng)


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``max_switch_prob`` caps every edge's switching probability below 1 so
    no edge is on with certainty. ``exclusion_switch_prob`` sets the
    switching probability of same-part edges; None picks 1 / (n - 1) for a
    part with n vertices, capped at 0.5. Each iteration picks its move
    independently of the state: a whole-assignment tree proposal with
    probability ``tree_prob``, a part exchange with probability
    ``swap_prob``, otherwise a cluster move. Every move leaves the posterior
    invariant, so any fixed mixture does too. ``seed_mode`` picks the
    cluster move's seed uniformly over vertices ("vertex") or uniformly
    over the positive-edge clusters of a fully switched graph ("cluster").
    """

    iterations: int = 500
    burn_in: int = 0
    seed: int = 0
    record_trace: bool = False
    count_visits: bool = False
    init: str = "zero"
    max_switch_prob: float = 0.99
    exclusion_switch_prob: float | None = None
    normalize_compatible: bool = True
    swap_prob: float = 0.4
    tree_prob: float = 0.2
    seed_mode: str = "vertex"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.seed_mode not in ("vertex", "cluster"):
            raise ValueError("seed_mode must be 'vertex' or 'cluster'")
        if self.init not in ("zero", "greedy"):
            raise ValueError("init must be 'zero' or 'greedy'")
        if not 0.0 <= self.max_switch_prob < 1.0:
            raise ValueError("max_switch_prob must lie in [0, 1)")
        if not (0.0 <= self.swap_prob and 0.0 <= self.tree_prob and self.swap_prob + self.tree_prob <= 1.0):
            raise ValueError("swap_prob and tree_prob must be non-negative and sum to at most 1")


@dataclass
class ChainResult:
    best_state: MatchState
    best_score: float
    acceptance_rate: float
    trace: list[tuple[int, int, bool, float]] | None = None
    visits: Counter | None = None
    final_labels: tuple[int, ...] = ()


@dataclass(frozen=True)
class CompositeCluster:
    """Vertices to flip, split into positive-edge clusters and their couplings."""

    vertices: frozenset[int]
    clusters: tuple[frozenset[int], ...] = ()
    coupling: tuple[int, ...] = field(default=())


def switch_probs(g: CandidacyGraph, cfg: ChainConfig = ChainConfig()) -> np.ndarray:
    """Edge switching probabilities used for cluster formation.

    With ``normalize_compatible`` each compatible edge's probability is
    divided by the total compatible probability its endpoints spread over
    the other endpoint's part, so a growing cluster tends to recruit one
    candidate per neighboring part rather than several mutually exclusive
    ones. Any fixed per-edge choice leaves the target posterior invariant.
    """
    rho = g.prob.astype(float).copy()
    if cfg.normalize_compatible and g.n_edges:
        pos = np.flatnonzero(g.positive)
        if pos.size:
            n_parts = len(g.parts)
            mass = np.zeros((len(g), n_parts))
            np.add.at(mass, (g.src[pos], g.part_of[g.dst[pos]]), g.prob[pos])
            np.add.at(mass, (g.dst[pos], g.part_of[g.src[pos]]), g.prob[pos])
            denom = np.maximum.reduce([
                np.ones(pos.size),
                mass[g.src[pos], g.part_of[g.dst[pos]]],
                mass[g.dst[pos], g.part_of[g.src[pos]]],
            ])
            rho[pos] = g.prob[pos] / denom
    rho = np.minimum(rho, cfg.max_switch_prob)
    if g.n_edges and g.same_part.any():
        if cfg.exclusion_switch_prob is not None:
            excl = np.full(g.n_edges, cfg.exclusion_switch_prob)
        else:
            sizes = np.bincount(g.part_of, minlength=len(g.parts))
            n = sizes[g.part_of[g.src]]
            excl = np.minimum(0.5, 1.0 / np.maximum(n - 1, 1))
        rho = np.where(g.same_part, excl, rho)
    return rho


def classify_edges(g: CandidacyGraph, labels) -> np.ndarray:
    """Consistency per edge: positive edges agree, negative edges disagree."""
    lab = np.asarray(labels, dtype=bool)
    equal = lab[g.src] == lab[g.dst]
    return np.where(g.positive, equal, ~equal)


def _grow(g: CandidacyGraph, labels: Sequence[int], rho: Sequence[float], rng: UniformStream, seed: int | None = None):
    """Component of a random seed vertex in the graph of 'on' edges.

    Edges are switched lazily as the search reaches them; each edge is drawn
    at most once, which gives the same law as switching all edges up front.
    """
    n = len(g)
    if seed is None:
        seed = rng.randrange(n)
    nbrs = g._nbrs
    in_cc = {seed}
    order = [seed]
    on_edges = []
    stack = [seed]
    while stack:
        v = stack.pop()
        lv = labels[v]
        for k, w, pos in nbrs[v]:
            if w in in_cc:
                continue
            if (labels[w] == lv) != pos:
                continue
            if rng.random() < rho[k]:
                in_cc.add(w)
                order.append(w)
                stack.append(w)
                on_edges.append(k)
    return in_cc, order, on_edges


def _cluster_seeded(g: CandidacyGraph, labels: Sequence[int], rho: Sequence[float], rng: UniformStream):
    """Switch every consistent edge, choose a positive-edge cluster uniformly, return its V_cc.

    Edges away from V_cc and the clusters inside it are identical before
    and after the flip, so the cluster count cancels and the cut-edge ratio
    stays the full proposal ratio.
    """
    n = len(g)
    src, dst, pos = g._src_list, g._dst_list, g._pos_list
    on = [k for k in range(g.n_edges) if ((labels[src[k]] == labels[dst[k]]) == pos[k]) and rng.random() < rho[k]]
    root = list(range(n))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for k in on:
        if pos[k]:
            a, b = find(src[k]), find(dst[k])
            if a != b:
                root[max(a, b)] = min(a, b)
    reps = sorted({find(v) for v in range(n)})
    pick = reps[rng.randrange(len(reps))]
    for k in on:
        if not pos[k]:
            a, b = find(src[k]), find(dst[k])
            if a != b:
                root[max(a, b)] = min(a, b)
    top = find(pick)
    order = [v for v in range(n) if find(v) == top]
    return set(order), order


def _prepare(g: CandidacyGraph) -> None:
    if not hasattr(g, "_src_list"):
        g._src_list = g.src.tolist()
        g._dst_list = g.dst.tolist()
        g._pos_list = g.positive.tolist()
        g._part_list = g.part_of.tolist()
        members: list[list[int]] = [[] for _ in g.parts]
        for i, k in enumerate(g._part_list):
            members[k].append(i)
        g._part_members = members
        g._nbrs = [
            [(k, g._dst_list[k] if g._src_list[k] == v else g._src_list[k], g._pos_list[k]) for k in g.incident[v]]
            for v in range(len(g))
        ]


def exchange_move(g: CandidacyGraph, labels: Sequence[int], rng: UniformStream, seed: int | None = None) -> list[int]:
    """Singleton form of the coupled-cluster swap.

    An inactive seed is coupled with the active vertices of its own part so
    the pair trades labels; an active seed is switched off alone. Choosing
    the partner in the new state recovers the move, so the proposal is
    symmetric and the acceptance uses the posterior ratio only.
    """
    _prepare(g)
    if seed is None:
        seed = rng.randrange(len(g))
    if labels[seed]:
        return [seed]
    return [seed] + [a for a in g._part_members[g._part_list[seed]] if labels[a]]


class TreeProposal:
    """Whole-assignment proposals drawn exactly from a tree-structured factor.

    Each part takes one of its matched vertices or none. The proposal
    distribution keeps the likelihood, the unmatched penalty and every edge
    between part pairs of a spanning forest of the kinematic part graph;
    samples come from forward filtering and backward sampling on that
    forest. Used as an independence Metropolis-Hastings move, the acceptance
    only has to account for the terms left out (symmetry, off-forest
    overlaps, the scale count). States with an active NULL vertex lie
    outside the proposal's support and are never left through this move.
    """

    def __init__(self, g: CandidacyGraph, p: PriorParams = PriorParams()):
        n_parts = len(g.parts)
        self._part = g.part_of
        self.members = [[] for _ in range(n_parts)]
        self.state_of = np.full(len(g), -1, dtype=int)
        for v in range(len(g)):
            if not g.is_null[v]:
                k = int(g.part_of[v])
                self.members[k].append(v)
                self.state_of[v] = len(self.members[k])
        self.unary = [np.concatenate([[-p.alpha_u], -g.distance[m]]) for m in self.members]
        self.tree = self._forest(g, n_parts)
        self.pair = {}
        for a, b in self.tree:
            self.pair[(a, b)] = np.zeros((len(self.members[a]) + 1, len(self.members[b]) + 1))
        for k in range(g.n_edges):
            u, v = int(g.src[k]), int(g.dst[k])
            if g.is_null[u] or g.is_null[v]:
                continue
            a, b = int(g.part_of[u]), int(g.part_of[v])
            if (a, b) in self.pair:
                self.pair[(a, b)][self.state_of[u], self.state_of[v]] += g.weight[k]
            elif (b, a) in self.pair:
                self.pair[(b, a)][self.state_of[v], self.state_of[u]] += g.weight[k]
        self._schedule(n_parts)

    @staticmethod
    def _forest(g: CandidacyGraph, n_parts: int) -> list[tuple[int, int]]:
        root = list(range(n_parts))

        def find(x):
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        chosen = []
        for e in g.edges:
            if e.kind is not EdgeKind.KINEMATIC:
                continue
            a, b = int(g.part_of[e.u]), int(g.part_of[e.v])
            ra, rb = find(a), find(b)
            if ra != rb:
                root[rb] = ra
                chosen.append((a, b))
        return chosen

    def _schedule(self, n_parts: int) -> None:
        nbrs = [[] for _ in range(n_parts)]
        for a, b in self.tree:
            nbrs[a].append(b)
            nbrs[b].append(a)
        self.parent = [-1] * n_parts
        self.order = []
        seen = [False] * n_parts
        for r in range(n_parts):
            if seen[r]:
                continue
            seen[r] = True
            queue = [r]
            while queue:
                x = queue.pop(0)
                self.order.append(x)
                for y in nbrs[x]:
                    if not seen[y]:
                        seen[y] = True
                        self.parent[y] = x
                        queue.append(y)
        # upward pass: belief of each part given its subtree
        self.belief = [u.copy() for u in self.unary]
        for c in reversed(self.order):
            pa = self.parent[c]
            if pa >= 0:
                w = self._edge(pa, c)
                z = w + self.belief[c][None, :]
                m = z.max(axis=1)
                self.belief[pa] = self.belief[pa] + m + np.log(np.exp(z - m[:, None]).sum(axis=1))

    def _edge(self, a: int, b: int) -> np.ndarray:
        """Pair potential indexed [state of a, state of b]."""
        return self.pair[(a, b)] if (a, b) in self.pair else self.pair[(b, a)].T

    def assignment(self, labels) -> list[int] | None:
        """Per-part state of a labeling, or None outside the proposal support."""
        x = [0] * len(self.members)
        for v, b in enumerate(labels):
            if b:
                s = self.state_of[v]
                if s < 0:
                    return None
                k = int(self._part[v])
                if x[k]:
                    return None
                x[k] = int(s)
        return x

    def log_weight(self, x: Sequence[int]) -> float:
        """Unnormalized log proposal probability of an assignment."""
        total = sum(float(self.unary[k][s]) for k, s in enumerate(x))
        for a, b in self.tree:
            total += float(self.pair[(a, b)][x[a], x[b]])
        return total

    def sample(self, rng: UniformStream) -> list[int]:
        x = [0] * len(self.members)
        for c in self.order:
            logits = self.belief[c]
            pa = self.parent[c]
            if pa >= 0:
                logits = logits + self._edge(pa, c)[x[pa]]
            w = np.exp(logits - logits.max())
            cdf = np.cumsum(w)
            x[c] = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(w) - 1)
        return x

    def vertices(self, x: Sequence[int]) -> list[int]:
        return [self.members[k][s - 1] for k, s in enumerate(x) if s]


def tree_move(g: CandidacyGraph, labels: Sequence[int], rng: UniformStream, tp: TreeProposal) -> tuple[list[int], float]:
    """Draw a fresh assignment; returns (vertices to flip, log proposal ratio)."""
    x = tp.assignment(labels)
    if x is None:
        return [], -math.inf
    y = tp.sample(rng)
    new = set(tp.vertices(y))
    old = set(tp.vertices(x))
    flips = sorted(old ^ new)
    return flips, tp.log_weight(x) - tp.log_weight(y)


def sample_composite_cluster(
    g: CandidacyGraph,
    labels,
    rng,
    rho: Sequence[float] | None = None,
    seed_vertex: int | None = None,
) -> CompositeCluster:
    """Switch consistent edges on with their probabilities and collect V_cc.

    V_cc is the seed vertex's cluster (positive 'on' edges) together with
    every cluster reachable through 'on' negative edges. ``rho`` defaults to
    the raw edge probabilities.
    """
    if len(g) == 0:
        raise ValueError("graph has no vertices")
    _prepare(g)
    rng = _as_stream(rng)
    labels = [int(b) for b in labels]
    rho = g.prob.tolist() if rho is None else list(rho)
    members, _, on_edges = _grow(g, labels, rho, rng, seed_vertex)
    on = set(on_edges)
    # finish switching edges inside V_cc that the search skipped
    for v in sorted(members):
        for k in g.incident[v]:
            w = g._dst_list[k] if g._src_list[k] == v else g._src_list[k]
            if k in on or w not in members or w < v:
                continue
            if (labels[w] == labels[v]) == g._pos_list[k] and rng.random() < rho[k]:
                on.add(k)
    parent = {v: v for v in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k in on:
        if g._pos_list[k]:
            a, b = find(g._src_list[k]), find(g._dst_list[k])
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, set[int]] = {}
    for v in members:
        groups.setdefault(find(v), set()).add(v)
    clusters = tuple(frozenset(s) for _, s in sorted(groups.items()))
    coupling = tuple(sorted(k for k in on if not g._pos_list[k]))
    return CompositeCluster(frozenset(members), clusters, coupling)


def relabel(labels, cc: CompositeCluster | Sequence[int]) -> tuple[tuple[int, ...], list[int]]:
    """Flip every vertex of the composite cluster; returns (new labels, changed)."""
    verts = cc.vertices if isinstance(cc, CompositeCluster) else cc
    new = [int(b) for b in labels]
    changed = sorted(verts)
    for v in changed:
        new[v] = 1 - new[v]
    return tuple(new), changed


def _log_cut(g: CandidacyGraph, labels, members, rho) -> float:
    total = 0.0
    nbrs = g._nbrs
    for v in members:
        lv = labels[v]
        for k, w, pos in nbrs[v]:
            if w in members:
                continue
            if (labels[w] == lv) == pos:
                r = rho[k]
                if r >= 1.0:
                    return -math.inf
                total += math.log1p(-r)
    return total


def log_proposal_ratio(g: CandidacyGraph, labels, new_labels, members, rho=None) -> float:
    """log q(M'->M) / q(M->M') from the cut edges around V_cc."""
    _prepare(g)
    members = set(members)
    rho = g.prob.tolist() if rho is None else rho
    fwd = _log_cut(g, labels, members, rho)
    back = _log_cut(g, new_labels, members, rho)
    if fwd == -math.inf:
        return math.inf if back > -math.inf else 0.0
    return back - fwd


def proposal_ratio(g: CandidacyGraph, labels, new_labels, cc, rho=None) -> float:
    members = cc.vertices if isinstance(cc, CompositeCluster) else cc
    return math.exp(log_proposal_ratio(g, labels, new_labels, members, rho))


def _accept_log(score: float, new_score: float, log_ratio: float, rng: UniformStream) -> bool:
    if new_score == -math.inf or log_ratio == -math.inf:
        return False
    if score == -math.inf:
        return True
    log_a = log_ratio + new_score - score
    return log_a >= 0.0 or rng.random() < math.exp(log_a)


def mh_accept(score: float, new_score: float, ratio: float, rng) -> bool:
    """Metropolis-Hastings test with probability min(1, ratio * exp(new - old))."""
    log_ratio = math.log(ratio) if ratio > 0 else -math.inf
    return _accept_log(score, new_score, log_ratio, _as_stream(rng))


def greedy_labels(g: CandidacyGraph) -> list[int]:
    """Per part, activate the matched vertex with the smallest appearance distance."""
    best: dict[int, int] = {}
    for i in range(len(g)):
        if g.is_null[i]:
            continue
        part = int(g.part_of[i])
        if part not in best or g.distance[i] < g.distance[best[part]]:
            best[part] = i
    labels = [0] * len(g)
    for i in best.values():
        labels[i] = 1
    return labels


def run_chain(g: CandidacyGraph, p: PriorParams = PriorParams(), cfg: ChainConfig = ChainConfig()) -> ChainResult:
    """Composite cluster sampling from the all-unmatched labeling.

    Each iteration forms V_cc (or, per ``ChainConfig``, a part-exchange pair
    or a tree-drawn assignment), flips it and accepts by Metropolis-Hastings
    with that move's proposal ratio. The best state ever visited is kept.
    """
    if len(g) == 0:
        raise ValueError("graph has no vertices")
    _prepare(g)
    rng = UniformStream(cfg.seed)
    rho = switch_probs(g, cfg).tolist()
    tp = TreeProposal(g, p) if cfg.tree_prob else None
    labels = [0] * len(g)
    scorer = IncrementalScorer(g, labels, p)
    if cfg.init == "greedy":
        scorer.flip_many([i for i, b in enumerate(greedy_labels(g)) if b])
        if scorer.score == -math.inf:
            scorer = IncrementalScorer(g, [0] * len(g), p)
    labels = scorer.labels
    score = scorer.score
    best_score, best_labels = score, tuple(labels)
    accepted = 0
    trace = [] if cfg.record_trace else None
    visits = Counter() if cfg.count_visits else None
    for it in range(cfg.iterations):
        u = rng.random() if cfg.tree_prob or cfg.swap_prob else 1.0
        if u < cfg.tree_prob:
            order, log_ratio = tree_move(g, labels, rng, tp)
            members = order
            scorer.flip_many(order)
        elif u < cfg.tree_prob + cfg.swap_prob:
            order = members = exchange_move(g, labels, rng)
            scorer.flip_many(order)
            log_ratio = 0.0
        else:
            if cfg.seed_mode == "cluster":
                members, order = _cluster_seeded(g, labels, rho, rng)
            else:
                members, order, _ = _grow(g, labels, rho, rng)
            fwd = _log_cut(g, labels, members, rho)
            scorer.flip_many(order)
            log_ratio = _log_cut(g, labels, members, rho) - fwd
        new_score = scorer.score
        if _accept_log(score, new_score, log_ratio, rng):
            score = new_score
            accepted += 1
            ok = True
            if score > best_score:
                best_score, best_labels = score, tuple(labels)
        else:
            scorer.flip_many(order)
            ok = False
        if trace is not None:
            trace.append((it, len(members), ok, score))
        if visits is not None and it >= cfg.burn_in:
            visits[tuple(labels)] += 1
    best_state = derive_state(g, best_labels, p)
    return ChainResult(
        best_state=best_state,
        best_score=log_posterior(g, best_labels, p),
        acceptance_rate=accepted / cfg.iterations,
        trace=trace,
        visits=visits,
        final_labels=tuple(labels),
    )


def run_chains(g: CandidacyGraph, p: PriorParams = PriorParams(), cfg: ChainConfig = ChainConfig(), n_chains: int = 1) -> ChainResult:
    """Independent chains with seeds spawned from ``cfg.seed``; best score wins.

    Ties keep the earliest chain, so the result does not depend on scheduling.
    """
    if n_chains == 1:
        return run_chain(g, p, cfg)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(n_chains, dtype=np.uint64)
    best = None
    for s in seeds:
        res = run_chain(g, p, replace(cfg, seed=int(s)))
        if best is None or res.best_score > best.best_score:
            best = res
    return best


def write_trace(path: str | Path, result: ChainResult) -> None:
    if result.trace is None:
        raise ValueError("chain was run without record_trace")
    lines = ["iteration,cluster_size,accepted,log_posterior"]
    lines += [f"{i},{n},{int(a)},{s:.12g}" for i, n, a, s in result.trace]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---- exact oracles ------------------------------------------------------


def _all_scores(g: CandidacyGraph, p: PriorParams, chunk: int = 1 << 16):
    """Log-posterior of every labeling, index k <-> bits of k with vertex 0 as MSB."""
    n = len(g)
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    real = ~g.is_null
    dist = np.where(real, g.distance, 0.0)
    n_parts = len(g.parts)
    part_member = np.zeros((n, max(n_parts, 1)))
    part_member[np.flatnonzero(real), g.part_of[real]] = 1.0
    bins = scale_bins(g, p.scale_quantum)
    uniq = sorted(set(bins[real].tolist()))
    bin_member = np.zeros((n, max(len(uniq), 1)))
    for j, b in enumerate(uniq):
        bin_member[np.flatnonzero(real & (bins == b)), j] = 1.0
    finite = np.isfinite(g.weight)
    out = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(bool)
        lik = -(bits @ dist) if n else np.zeros(len(idx))
        n_u = n_parts - ((bits @ part_member) > 0).sum(axis=1) if n_parts else np.zeros(len(idx))
        n_s = ((bits @ bin_member) > 0).sum(axis=1) if uniq else np.zeros(len(idx))
        s = lik - p.alpha_u * n_u - p.alpha_s * n_s
        if g.n_edges:
            both = bits[:, g.src] & bits[:, g.dst]
            s = s + both[:, finite] @ g.weight[finite]
            s = np.where(both[:, ~finite].any(axis=1), -np.inf, s)
        out[start : start + len(idx)] = s
    return out


def labels_of_index(k: int, n: int) -> tuple[int, ...]:
    return tuple((k >> (n - 1 - i)) & 1 for i in range(n))


def oracle_map(g: CandidacyGraph, p: PriorParams = PriorParams()) -> tuple[tuple[int, ...], float]:
    """Exhaustive MAP; ties go to the lexicographically smallest labeling."""
    n = len(g)
    if n > ORACLE_MAX_VERTICES:
        raise GraphTooLargeError(f"oracle limited to {ORACLE_MAX_VERTICES} vertices, graph has {n}")
    scores = _all_scores(g, p)
    top = scores.max()
    if np.isfinite(top):
        # rounding in the vectorized sum must not decide between near-ties
        cands = np.flatnonzero(scores >= top - 1e-9 * max(1.0, abs(top)))
        exact = [(log_posterior(g, labels_of_index(int(k), n), p), -int(k)) for k in cands]
        best_score, neg_k = max(exact)
        best = labels_of_index(-neg_k, n)
    else:
        best = labels_of_index(int(np.argmax(scores)), n)
        best_score = log_posterior(g, best, p)
    return best, best_score


def enumerate_posterior(g: CandidacyGraph, p: PriorParams = PriorParams()) -> dict[tuple[int, ...], float]:
    """Normalized posterior mass of every labeling (forbidden ones get 0)."""
    n = len(g)
    if n > ENUMERATE_MAX_VERTICES:
        raise GraphTooLargeError(f"enumeration limited to {ENUMERATE_MAX_VERTICES} vertices, graph has {n}")
    scores = _all_scores(g, p)
    top = scores.max()
    if not np.isfinite(top):
        raise ValueError("every labeling is forbidden")
    w = np.exp(scores - top)
    w /= w.sum()
    return {labels_of_index(k, n): float(w[k]) for k in range(len(w))}
