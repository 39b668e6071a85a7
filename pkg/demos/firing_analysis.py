"""Rank last-conv neurons by class separation of their firing scores."""

import numpy as np

from fisherprune import (
    TrainConfig, build_cnn, diagonal_dominance, extract_firing_matrix,
    full_lda_directions, generate_synthetic, icc_scores, rank_and_select,
    scatter_matrices, standardize, train, variance_ranking_baseline,
)
from fisherprune.data import images_labels

split = generate_synthetic(n_per_class=80, size=16, seed=3)
tr_imgs, tr_labels = images_labels(split.train)
te_imgs, te_labels = images_labels(split.test)

# a small stack is enough at 16x16
net = build_cnn((1, 16, 16), [(8, 3, 1, True), (16, 3, 1, True)], [32], 2, seed=3)
train(net, tr_imgs, tr_labels, te_imgs, te_labels,
      TrainConfig(epochs=8, lr=0.005, seed=3))

last = net.last_conv_index()
mat = standardize(extract_firing_matrix(net, split.train, last))
scatter = scatter_matrices(mat)

# how diagonal is the within-class scatter? near 1 means per-neuron
# scores tell the same story as the full multivariate criterion
print(f"diagonal dominance of S_w: {diagonal_dominance(scatter.s_w):.3f}")

ranking = rank_and_select(icc_scores(scatter), k=4)
print("rank  neuron  icc    s2b      s2w")
for r, n in enumerate(ranking.order):
    mark = " *" if n in ranking.selected else ""
    print(f"{r:4d}  {n:6d}  {ranking.icc[n]:.3f}  {scatter.s_b[n, n]:7.1f}"
          f"  {scatter.s_w[n, n]:7.1f}{mark}")

# cross-check the per-neuron picture against the full generalized problem
evals, dirs = full_lda_directions(scatter, m=4)
print("top LDA eigenvalues:", np.round(evals, 2))
print("dominant neuron per direction:", np.abs(dirs).argmax(axis=0))

baseline = variance_ranking_baseline(mat, k=4)
print("icc pick     :", sorted(ranking.selected.tolist()))
print("variance pick:", sorted(baseline.selected.tolist()))
