"""
Training the aggregation head
=============================

Train the head on synthetic classes for a few hundred steps and compare
retrieval quality before and after. Runs in a few seconds.
"""

import numpy as np

from darac import (
    RetrievalIndex,
    ToyExtractor,
    TrainConfig,
    class_protocol,
    embed,
    evaluate_map,
    head_init,
    head_param_count,
    l2_normalize_rows,
    make_rng,
    pooled_dataset,
    train,
)
from darac.synthetic import SyntheticSpec, synthetic_dataset

# Ten classes: twelve training views each, six held-out views each.
train_set = synthetic_dataset(SyntheticSpec(per_class=12), seed=0)
test_set = synthetic_dataset(SyntheticSpec(per_class=6), seed=0, sample_seed=1000)

cfg = TrainConfig(seed=1, k=8, n=4, steps=500, learning_rate=1e-4, L_head=16, C=16)
print("learnable parameters:", head_param_count(cfg.L_head))

extractor = ToyExtractor(channels=cfg.C)
P_test = pooled_dataset(test_set, extractor)
protocol = class_protocol(test_set.names, test_set.labels)


def test_map(params):
    X = l2_normalize_rows(embed(P_test, params))
    return evaluate_map(RetrievalIndex(X, test_set.names), protocol)


# The untrained head uses the same seed, so it is the starting point of
# the run below.
print("mAP before training: %.4f" % test_map(head_init(cfg.L_head, cfg.C, make_rng(cfg.seed))))

params, losses = train(cfg, train_set)
print("mean loss, first 50 steps: %.4f" % np.mean(losses[:50]))
print("mean loss, last 50 steps:  %.4f" % np.mean(losses[-50:]))
print("mAP after training:  %.4f" % test_map(params))

# The learned first layer weights all 42 pooled rows. Row 0 is the global
# max and row 21 the global average.
w = params.layer1_weights
print("mean |weight| on max rows: %.3f, on avg rows: %.3f" % (np.abs(w[:, :21]).mean(), np.abs(w[:, 21:]).mean()))
