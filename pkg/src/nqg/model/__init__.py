"""Latent-derivation scoring model: anchored rule scores, MML training, Viterbi prediction."""

from nqg.model.inference import (CompiledForest, EmptyForest, Prediction, ViterbiResult,
                                 compile_forest, forest_edge_scores, inside, log_marginal, predict,
                                 viterbi)
from nqg.model.params import (ModelConfig, ModelParams, SpanEncoder, derivation_score, load_params,
                              save_params, score_anchored_rule)
from nqg.model.train import (TrainConfig, TrainingExample, UnreachableGold, mml_loss,
                             mml_loss_and_grad, prepare_dataset, prepare_example, train)
