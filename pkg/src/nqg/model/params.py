"""Model parameters: span encoder, scoring heads and rule embeddings.

Anchored rule score::

    phi(r, i, j) = f_s([w_i, w_j]) + e_r . f_r([w_i, w_j])

with ``w`` the contextual token vectors of the source and ``i``/``j`` the
first and last token of the anchored span (inclusive).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from nqg.grammar import Grammar, format_rule, parse_rule

UNK = "<unk>"
BOUNDARY = "<s>"
PARAMS_FORMAT = "nqg-params"
PARAMS_VERSION = 1
DTYPE = torch.float64


@dataclass
class ModelConfig:
    d: int = 256  # hidden size of the scoring heads and rule embeddings
    d_enc: int = 64  # token vector size
    window: int = 1  # context tokens on each side mixed into a token vector
    init_scale: float = 0.1


class SpanEncoder(nn.Module):
    """Token embeddings mixed over a fixed window of neighbours (one layer).

    Each output vector sees the tokens at relative offsets ``-window..window``
    through separate weight blocks, so it knows which side a neighbour is on.
    The encoder is the only part that would change for a pre-trained model.
    """

    def __init__(self, vocab: Sequence[str], d_enc: int, window: int):
        super().__init__()
        self.vocab = list(vocab)
        self.index = {t: k for k, t in enumerate(self.vocab)}
        self.window = window
        self.embed = nn.Embedding(len(self.vocab), d_enc, dtype=DTYPE)
        self.mix = nn.Linear((2 * window + 1) * d_enc, d_enc, dtype=DTYPE)

    def token_ids(self, tokens: Sequence[str]) -> torch.Tensor:
        unk = self.index[UNK]
        return torch.tensor([self.index.get(t, unk) for t in tokens], dtype=torch.long)

    def forward(self, tokens: Sequence[str]) -> torch.Tensor:
        pad = [BOUNDARY] * self.window
        ids = self.token_ids(pad + list(tokens) + pad)
        e = self.embed(ids)
        n = len(tokens)
        windows = torch.cat([e[k:k + n] for k in range(2 * self.window + 1)], dim=1)
        return torch.tanh(self.mix(windows))


class ModelParams(nn.Module):
    def __init__(self, grammar: Grammar, vocab: Sequence[str], config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.grammar = grammar
        vocab = [BOUNDARY, UNK] + sorted(set(vocab) - {BOUNDARY, UNK})
        c = self.config
        self.encoder = SpanEncoder(vocab, c.d_enc, c.window)
        self.rule_embeddings = nn.Parameter(torch.zeros(len(grammar), c.d, dtype=DTYPE))
        self.f_r = nn.Sequential(nn.Linear(2 * c.d_enc, c.d, dtype=DTYPE), nn.ReLU(),
                                 nn.Linear(c.d, c.d, dtype=DTYPE))
        self.f_s = nn.Sequential(nn.Linear(2 * c.d_enc, c.d, dtype=DTYPE), nn.ReLU(),
                                 nn.Linear(c.d, 1, dtype=DTYPE))

    @classmethod
    def initialize(cls, grammar: Grammar, vocab: Sequence[str], config: ModelConfig | None = None,
                   seed: int = 0) -> "ModelParams":
        """Every parameter drawn from uniform(-s, s) by a seeded generator."""
        params = cls(grammar, vocab, config)
        gen = torch.Generator().manual_seed(seed)
        s = params.config.init_scale
        with torch.no_grad():
            for _, p in sorted(params.named_parameters()):
                p.copy_(torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 * s - s)
        return params

    def zero_(self) -> "ModelParams":
        with torch.no_grad():
            for p in self.parameters():
                p.zero_()
        return self

    def encode(self, source: Sequence[str]) -> torch.Tensor:
        """Per-token vectors, shape (len(source), d_enc)."""
        return self.encoder(source)

    def span_features(self, encoding: torch.Tensor, starts, ends) -> tuple[torch.Tensor, torch.Tensor]:
        """f_s and f_r on inclusive spans; shapes (S,) and (S, d)."""
        pair = torch.cat([encoding[starts], encoding[ends]], dim=1)
        return self.f_s(pair).squeeze(1), self.f_r(pair)

    def anchored_scores(self, encoding: torch.Tensor, rules, starts, ends) -> torch.Tensor:
        """phi for aligned lists of rule ids and inclusive spans."""
        rules = torch.as_tensor(rules, dtype=torch.long)
        starts = torch.as_tensor(starts, dtype=torch.long)
        ends = torch.as_tensor(ends, dtype=torch.long)
        if len(rules) == 0:
            return torch.zeros(0, dtype=DTYPE)
        spans = torch.stack([starts, ends], dim=1)
        uniq, inverse = torch.unique(spans, dim=0, return_inverse=True)
        fs, fr = self.span_features(encoding, uniq[:, 0], uniq[:, 1])
        return fs[inverse] + (self.rule_embeddings[rules] * fr[inverse]).sum(dim=1)


def score_anchored_rule(params: ModelParams, rule: int, i: int, j: int,
                        encoding: torch.Tensor) -> torch.Tensor:
    """phi(r, i, j) for one rule anchored on tokens i..j (inclusive)."""
    if not 0 <= rule < len(params.grammar):
        raise KeyError(f"unknown rule id {rule}")
    if not 0 <= i <= j < encoding.shape[0]:
        raise IndexError(f"bad span ({i}, {j}) for {encoding.shape[0]} tokens")
    return params.anchored_scores(encoding, [rule], [i], [j])[0]


def derivation_score(params: ModelParams, derivation, encoding: torch.Tensor) -> torch.Tensor:
    """Sum of anchored scores over a derivation's rules."""
    triples = list(derivation.anchored_rules())
    if not triples:
        return torch.zeros((), dtype=DTYPE)
    rules, starts, ends = zip(*triples)
    return params.anchored_scores(encoding, rules, starts, [e - 1 for e in ends]).sum()


# Params file: JSON with named tensors.

def save_params(params: ModelParams, path) -> None:
    tensors = {}
    for name, p in sorted(params.state_dict().items()):
        t = p.detach().to(DTYPE)
        tensors[name] = {"shape": list(t.shape), "data": t.reshape(-1).tolist()}
    doc = {
        "format": PARAMS_FORMAT,
        "version": PARAMS_VERSION,
        "config": asdict(params.config),
        "vocab": params.encoder.vocab,
        "rules": [format_rule(r) for r in params.grammar.rules],
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_params(path, grammar: Grammar | None = None) -> ModelParams:
    """Load a params file; ``grammar`` must list the same rules in the same order."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != PARAMS_FORMAT:
        raise ValueError(f"{path}: not a params file")
    if doc.get("version") != PARAMS_VERSION:
        raise ValueError(f"{path}: unsupported params version {doc.get('version')}")
    stored = Grammar(parse_rule(line, max_target_repeats=None) for line in doc["rules"])
    if grammar is not None and [format_rule(r) for r in grammar.rules] != doc["rules"]:
        raise ValueError(f"{path}: params were trained for a different grammar")
    params = ModelParams(grammar or stored, doc["vocab"], ModelConfig(**doc["config"]))
    state = {name: torch.tensor(t["data"], dtype=DTYPE).reshape(t["shape"])
             for name, t in doc["tensors"].items()}
    params.load_state_dict(state)
    return params
