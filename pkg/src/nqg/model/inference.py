"""Inside (log-sum-exp) and Viterbi passes over parse forests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch

from nqg.grammar import ANCHOR, Grammar, ParseForest, TargetCfg, cfg_accepts, parse_source
from nqg.grammar.rules import substitute
from nqg.model.params import DTYPE, ModelParams

NEG_INF = float("-inf")
TIE_TOLERANCE = 1e-12


class EmptyForest(ValueError):
    """The forest has no root: no derivation exists."""


@dataclass
class CompiledForest:
    """A forest flattened into index tensors, grouped by node height.

    Scored edges are the non-anchor edges; ``levels`` lists, per height, the
    node ids at that height and a padded (nodes x edges) matrix of edge ids.
    """

    forest: ParseForest
    edge_rule: torch.Tensor
    edge_start: torch.Tensor
    edge_end: torch.Tensor  # inclusive
    edge_children: torch.Tensor  # (E, 2), child node ids, -1 for none
    levels: list[tuple[torch.Tensor, torch.Tensor]]
    root: int

    @property
    def num_nodes(self) -> int:
        return len(self.forest.nodes)


def compile_forest(forest: ParseForest) -> CompiledForest:
    if not forest.roots:
        raise EmptyForest("forest has no root")
    rules, starts, ends, children = [], [], [], []
    node_edges: list[list[int]] = []
    height = []
    for k, node in enumerate(forest.nodes):
        ids = []
        h = 0
        for e in forest.edges[k]:
            if e.rule == ANCHOR:
                # Anchors derive themselves with score 0.
                ids.append(-1)
                continue
            ids.append(len(rules))
            rules.append(e.rule)
            starts.append(node.start)
            ends.append(node.end - 1)
            ch = list(e.children) + [-1] * (2 - len(e.children))
            if len(ch) > 2:
                raise ValueError("edges with more than two children are not supported")
            children.append(ch)
            h = max([h] + [height[c] + 1 for c in e.children])
        height.append(h)
        node_edges.append(ids)
    by_height: dict[int, list[int]] = {}
    for k, h in enumerate(height):
        by_height.setdefault(h, []).append(k)
    levels = []
    for h in sorted(by_height):
        nodes = by_height[h]
        width = max(len(node_edges[k]) for k in nodes)
        mat = [node_edges[k] + [-2] * (width - len(node_edges[k])) for k in nodes]
        levels.append((torch.tensor(nodes, dtype=torch.long), torch.tensor(mat, dtype=torch.long)))
    return CompiledForest(
        forest,
        torch.tensor(rules, dtype=torch.long),
        torch.tensor(starts, dtype=torch.long),
        torch.tensor(ends, dtype=torch.long),
        torch.tensor(children, dtype=torch.long).reshape(-1, 2),
        levels,
        forest.roots[0],
    )


def edge_scores(params: ModelParams, compiled: CompiledForest, encoding: torch.Tensor) -> torch.Tensor:
    return params.anchored_scores(encoding, compiled.edge_rule, compiled.edge_start, compiled.edge_end)


def inside(compiled: CompiledForest, phi: torch.Tensor) -> torch.Tensor:
    """Log inside score of every node (differentiable in ``phi``).

    Edge value = phi(edge) + inside(children); node value = logsumexp over
    its edges.  Padding entries are -inf, anchor edges score 0.
    """
    n = compiled.num_nodes
    values = torch.cat([torch.full((n,), NEG_INF, dtype=DTYPE), torch.zeros(1, dtype=DTYPE)])
    children = compiled.edge_children.clone()
    children[children < 0] = n  # slot n holds 0 for "no child"
    if len(phi) == 0:  # anchors only
        phi = torch.zeros(1, dtype=DTYPE)
        children = torch.full((1, 2), n, dtype=torch.long)
    zero = torch.zeros((), dtype=DTYPE)
    neg_inf = torch.tensor(NEG_INF, dtype=DTYPE)
    for nodes, mat in compiled.levels:
        eid = mat.clamp(min=0)
        ch = children[eid]
        val = phi[eid] + values[ch[..., 0]] + values[ch[..., 1]]
        val = torch.where(mat == -1, zero, torch.where(mat == -2, neg_inf, val))
        values = values.index_put((nodes,), torch.logsumexp(val, dim=1))
    return values[:n]


def log_marginal(compiled_or_forest, params: ModelParams, encoding: torch.Tensor) -> torch.Tensor:
    """log of the summed exp-scores of every derivation in the forest.

    A rootless forest yields a -inf tensor; callers that need a distinct
    signal should test ``forest.roots`` or catch :class:`EmptyForest` from
    :func:`compile_forest`.
    """
    if isinstance(compiled_or_forest, ParseForest):
        if not compiled_or_forest.roots:
            return torch.tensor(NEG_INF, dtype=DTYPE)
        compiled = compile_forest(compiled_or_forest)
    else:
        compiled = compiled_or_forest
    phi = edge_scores(params, compiled, encoding)
    return inside(compiled, phi)[compiled.root]


# Viterbi ---------------------------------------------------------------------

@dataclass
class ViterbiResult:
    score: float
    target: tuple  # lexicographically smallest among tied best derivations
    tied_targets: frozenset


def _target_key(t: tuple) -> tuple:
    return tuple((type(s) is int, str(s)) for s in t)


def viterbi(forest: ParseForest, phi_by_edge: dict[tuple[int, int], float]) -> ViterbiResult:
    """Max-score derivation; ``phi_by_edge[(node, edge index)]`` gives edge scores.

    Each node keeps every target fragment reachable by a best-scoring
    derivation, so ties resolve to the lexicographically smallest full target.
    """
    if not forest.roots:
        raise EmptyForest("forest has no root")
    best: list[float] = []
    frags: list[dict] = []
    for k, node in enumerate(forest.nodes):
        top = NEG_INF
        out: dict = {}
        for m, e in enumerate(forest.edges[k]):
            if e.rule == ANCHOR:
                score, options = 0.0, [(forest.source[node.start],)]
            else:
                score = phi_by_edge[(k, m)] + sum(best[c] for c in e.children)
                options = None
            if score < top - _tol(top):
                continue
            if score > top + _tol(top):
                top, out = score, {}
            if options is None:
                tgt = forest.rules[e.rule].target
                options = _combine(tgt, [frags[c] for c in e.children])
            for o in options:
                out[o] = None
        best.append(top)
        frags.append(out)
    root = forest.roots[0]
    tied = frozenset(frags[root])
    return ViterbiResult(best[root], min(tied, key=_target_key), tied)


def _tol(x: float) -> float:
    return TIE_TOLERANCE * max(1.0, abs(x)) if math.isfinite(x) else 0.0


def _combine(target, child_options):
    results = [()]
    for opts in child_options:
        results = [r + (o,) for r in results for o in opts]
    return [substitute(target, frags) for frags in results]


def forest_edge_scores(params: ModelParams, forest: ParseForest,
                       encoding: torch.Tensor | None = None) -> dict[tuple[int, int], float]:
    if encoding is None:
        encoding = params.encode(forest.source)
    keys, rules, starts, ends = [], [], [], []
    for k, node in enumerate(forest.nodes):
        for m, e in enumerate(forest.edges[k]):
            if e.rule != ANCHOR:
                keys.append((k, m))
                rules.append(e.rule)
                starts.append(node.start)
                ends.append(node.end - 1)
    with torch.no_grad():
        phi = params.anchored_scores(encoding, rules, starts, ends).tolist()
    return dict(zip(keys, phi))


@dataclass
class Prediction:
    target: tuple | None  # None means abstain
    score: float | None = None
    reason: str = ""

    @property
    def abstained(self) -> bool:
        return self.target is None


def predict(grammar: Grammar, params: ModelParams, target_cfg: TargetCfg | None,
            source: Sequence[str]) -> Prediction:
    """Best-derivation target, or abstain when unparsable or rejected by the CFG."""
    x = tuple(source)
    if not x:
        return Prediction(None, reason="empty source")
    forest = parse_source(grammar, x)
    if not forest.roots:
        return Prediction(None, reason="no parse")
    with torch.no_grad():
        encoding = params.encode(x)
        result = viterbi(forest, forest_edge_scores(params, forest, encoding))
    if target_cfg is not None and not cfg_accepts(target_cfg, result.target):
        return Prediction(None, result.score, reason="rejected by target CFG")
    return Prediction(result.target, result.score)
