"""
Four regressors on the same data
================================

Least squares, epsilon-SVR solved by SMO, exact k-NN and LSH-forest k-NN.
"""

import numpy as np

from songsim.metrics import r2_score
from songsim.models import fit_knn, fit_lsh, fit_ols, fit_svr, grid_search, svr_grid

rng = np.random.default_rng(0)
centers = 3 * rng.standard_normal((8, 10))
X = centers[rng.integers(8, size=1000)] + rng.standard_normal((1000, 10))
y = np.tanh(X[:, 0] / 3) ** 2 + 0.05 * rng.standard_normal(1000)
Xtr, ytr, Xte, yte = X[:800], y[:800], X[800:], y[800:]

print("ols  ", round(r2_score(yte, fit_ols(Xtr, ytr).predict(Xte)), 3))
print("svr  ", round(r2_score(yte, fit_svr(Xtr[:300], ytr[:300], gamma=0.05, C=10).predict(Xte)), 3))
for k in (1, 5, 10):
    exact = r2_score(yte, fit_knn(Xtr, ytr, k=k).predict(Xte))
    approx = r2_score(yte, fit_lsh(Xtr, ytr, k=k).predict(Xte))
    print(f"k={k:<3} exact {exact:.3f}  lsh {approx:.3f}")

# 3 linear + 6 rbf settings, picked by 3-fold cross-validation
res = grid_search("svr", svr_grid(), Xtr[:150], ytr[:150], seed=0)
print(res.best_params, np.round(res.best_scores, 3))
