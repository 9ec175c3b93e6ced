"""
The rank approximation loss
===========================

Compute the loss on a tiny batch by hand, look at the transfer curve that
turns normalized ranks into soft scores, and check the analytic gradient
against central differences.
"""

import numpy as np

from darac import NraConfig, make_rng, nra_loss, nra_loss_grad, nra_transfer

cfg = NraConfig(alpha=4.0, epsilon=1e-4)

# Two tight pairs far apart on a line: each sample's positive is its
# nearest neighbour and the loss is close to its floor.
X = np.array([[0.0], [0.1], [1.0], [1.1]])
y = ["A", "A", "B", "B"]
J, aux = nra_loss(X, y, cfg)
print("loss:", J)
print("normalized rank of the hardest positive:", np.round(aux.r_pos_max, 4))
print("normalized rank of the hardest negative:", np.round(aux.r_neg_min, 4))

# The transfer curve is flat near both ends and steep in the middle, so
# mid-ranked hard examples dominate the gradient.
r = np.linspace(0, 1, 11)
print("r:   ", np.round(r, 2))
print("w(r):", np.round(nra_transfer(r, cfg.alpha), 4))

# Scaling or shifting the whole batch leaves the loss unchanged because
# distances are normalized per anchor.
rng = make_rng(0)
Z = rng.normal(size=(12, 8))
labels = np.repeat(np.arange(3), 4)
base = nra_loss(Z, labels, cfg)[0]
print("scale x10 changes the loss by", abs(nra_loss(10 * Z, labels, cfg)[0] - base))
print("translation changes the loss by", abs(nra_loss(Z + 3.0, labels, cfg)[0] - base))

# Central differences on every coordinate.
g = nra_loss_grad(Z, labels, cfg)
h = 1e-6
num = np.zeros_like(Z)
for idx in np.ndindex(Z.shape):
    Zp, Zm = Z.copy(), Z.copy()
    Zp[idx] += h
    Zm[idx] -= h
    num[idx] = (nra_loss(Zp, labels, cfg)[0] - nra_loss(Zm, labels, cfg)[0]) / (2 * h)
print("largest gradient mismatch:", np.max(np.abs(g - num)))
