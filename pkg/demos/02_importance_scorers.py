"""Run all seven token-importance scorers on one instance and compare them.

Each scorer produces a non-negative importance vector; extraction only uses
the ranking.  The script prints per-method ranks side by side, then checks
the two attribution-sum identities: integrated gradients' completeness and
deeplift's sum-to-delta.
"""

import numpy as np
from common import make_toy_task

from rationalex import decode, forward
from rationalex.scorers import (
    METHOD_NAMES,
    compute_scores,
    deeplift_attributions,
    integrated_gradients_attributions,
)

params, vocab, _, test_set = make_toy_task()
inst = test_set[0]
tokens = decode(inst, vocab)

ranks = {}
for name in METHOD_NAMES:
    omega = compute_scores(name, params, inst, seed=1, ig_steps=50,
                           lime_samples=300).omega
    order = np.argsort(-omega, kind="stable")
    rank = np.empty(inst.length, dtype=int)
    rank[order] = np.arange(1, inst.length + 1)
    ranks[name] = rank

header = "token           " + "".join(f"{name[:9]:>10s}" for name in METHOD_NAMES)
print(header)
for t in range(inst.length):
    row = f"{tokens[t]:16s}" + "".join(f"{ranks[name][t]:>10d}" for name in METHOD_NAMES)
    print(row)
print("\n(rank 1 = most important to that method)")

ref = forward(params, inst)
yhat = ref.predicted_class
p_full = ref.probs[yhat]
p_zero = forward(params, inst, range(inst.length)).probs[yhat]

ig = integrated_gradients_attributions(params, inst, steps=200)
print(f"\nintegrated gradients completeness: "
      f"sum(attr) = {ig.sum():+.6f} vs p(yhat|x) - p(yhat|0) = {p_full - p_zero:+.6f}")

dl = deeplift_attributions(params, inst)
print(f"deeplift sum-to-delta:            "
      f"sum(attr) = {dl.sum():+.6f} vs p(yhat|x) - p(yhat|0) = {p_full - p_zero:+.6f}")
