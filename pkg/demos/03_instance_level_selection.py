"""Instance-level selection of the scoring method, rationale length and type.

Candidate rationales are scored by erasure: mask the candidate, re-run the
model, and measure the output divergence.  The script shows the per-length
delta landscape for one method, then the per-method comparison, then the
full grid search, and finally cross-checks the search against the
brute-force oracle.
"""

from common import make_toy_task

from rationalex import candidate_delta, select_all, select_length, select_scorer
from rationalex.oracle import brute_force_select
from rationalex.scorers import compute_scores
from rationalex.selection import SelectionConfig, candidate_lengths, extract_topk

params, vocab, _, test_set = make_toy_task()
inst = test_set[0]

config = SelectionConfig(
    scorer_mode="instance_level",
    scorers=("random", "attention", "scaled_attention", "input_x_grad"),
    length_mode="instance_level", type_mode="instance_level",
    ratio=0.4, skip=0.0, divergence="jsd", seed=2,
)

print(f"instance {inst.id} (T={inst.length}), divergence = {config.divergence}\n")

omega = compute_scores("attention", params, inst, seed=config.seed)
print("delta landscape for attention + topk:")
for k in candidate_lengths(inst.length, config.ratio, config.skip):
    cand = extract_topk(omega, k, inst.id)
    delta = candidate_delta(params, inst, cand, config.divergence)
    print(f"  k={k}: delta = {delta:.4f}  positions = {cand.positions}")
best_len = select_length(params, inst, omega, config)
print(f"chosen length: k={best_len.k} (delta {best_len.delta:.4f})\n")

best_scorer = select_scorer(params, inst, config)
print(f"best method at fixed length: {best_scorer.scorer} "
      f"(delta {best_scorer.delta:.4f})\n")

chosen = select_all(params, inst, config)
print("full grid search over (scorer, length, type):")
print(f"  scorer = {chosen.scorer}, k = {chosen.k}, type = {chosen.rationale_type}")
print(f"  positions = {chosen.positions}, delta = {chosen.delta:.4f}\n")

oracle = brute_force_select(params, inst, config)
print(f"brute-force oracle agrees: {oracle.to_record() == chosen.to_record()}")
