"""Maximum marginal likelihood training over precomputed parse forests."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Sequence

import torch

from nqg.grammar import Grammar, TargetCfg, parse_constrained, parse_source
from nqg.model.inference import CompiledForest, compile_forest, edge_scores, inside
from nqg.model.params import ModelConfig, ModelParams

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")


class UnreachableGold(ValueError):
    """No derivation of the example's target exists under the grammar."""


@dataclass
class TrainConfig:
    steps: int = 256
    lr: float = 1e-4
    seed: int = 0
    optimizer: str = "sgd"
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class TrainingExample:
    source: tuple
    target: tuple
    full: CompiledForest
    gold: CompiledForest

    @property
    def unambiguous(self) -> bool:
        return self.full.forest.count_derivations() == self.gold.forest.count_derivations()


def prepare_example(grammar: Grammar, source: Sequence[str], target: Sequence[str]) -> TrainingExample:
    x, y = tuple(source), tuple(target)
    gold = parse_constrained(grammar, x, y)
    if not gold.roots:
        raise UnreachableGold(f"gold target not derivable: {' '.join(x)}")
    full = parse_source(grammar, x)
    return TrainingExample(x, y, compile_forest(full), compile_forest(gold))


def mml_loss(params: ModelParams, example: TrainingExample) -> torch.Tensor:
    """-log P(y | x) = log Z(x) - log Z(x, y); differentiable in ``params``."""
    encoding = params.encode(example.source)
    log_z = inside(example.full, edge_scores(params, example.full, encoding))[example.full.root]
    log_zy = inside(example.gold, edge_scores(params, example.gold, encoding))[example.gold.root]
    return log_z - log_zy


def mml_loss_and_grad(params: ModelParams, example: TrainingExample) -> tuple[float, dict[str, torch.Tensor]]:
    params.zero_grad(set_to_none=True)
    loss = mml_loss(params, example)
    loss.backward()
    grads = {name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
             for name, p in params.named_parameters()}
    return loss.item(), grads


def prepare_dataset(grammar: Grammar, pairs) -> tuple[list[TrainingExample], int]:
    """Forests for every derivable pair, plus the number of pairs dropped."""
    prepared, dropped = [], 0
    for x, y in pairs:
        try:
            prepared.append(prepare_example(grammar, x, y))
        except UnreachableGold as e:
            dropped += 1
            log.warning("skipping example: %s", e)
    return prepared, dropped


def train(grammar: Grammar, pairs, target_cfg: TargetCfg | None = None,
          config: TrainConfig | None = None, prepared: list[TrainingExample] | None = None,
          callback=None) -> ModelParams:
    """Train anchored-rule scores by MML, one example per step.

    Examples cycle in freshly shuffled epochs.  Examples whose gold target is
    not derivable are dropped with a warning; if none remain this is an
    error.  ``target_cfg`` is accepted for interface symmetry with
    prediction; training itself does not filter targets.
    """
    config = config or TrainConfig()
    pairs = [(tuple(x), tuple(y)) for x, y in pairs]
    if prepared is None:
        prepared, dropped = prepare_dataset(grammar, pairs)
        if dropped:
            log.warning("dropped %d of %d examples with unreachable gold targets", dropped, len(pairs))
    if not prepared:
        raise UnreachableGold("no training example is derivable under the grammar")
    vocab = sorted({t for x, _ in pairs for t in x} | {t for r in grammar.rules for t in r.source
                                                      if type(t) is str})
    params = ModelParams.initialize(grammar, vocab, config.model, config.seed)
    # Examples with a single derivation contribute zero loss and gradient.
    active = [ex for ex in prepared if not ex.unambiguous]
    log.info("training on %d examples (%d ambiguous)", len(prepared), len(active))
    if config.steps == 0 or not active:
        return params
    if config.optimizer == "adam":
        opt = torch.optim.Adam(params.parameters(), lr=config.lr)
    else:
        opt = torch.optim.SGD(params.parameters(), lr=config.lr)
    rng = random.Random(config.seed)
    order: list[int] = []
    for step in range(1, config.steps + 1):
        if not order:
            order = list(range(len(active)))
            rng.shuffle(order)
        ex = active[order.pop()]
        opt.zero_grad(set_to_none=True)
        loss = mml_loss(params, ex)
        loss.backward()
        opt.step()
        log.debug("step %d loss %.6f", step, loss.item())
        if callback is not None:
            callback(step, loss.item())
    return params
