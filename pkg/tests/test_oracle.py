"""The brute-force search, occlusion scoring and finite-difference gradients."""

import numpy as np
import pytest

from conftest import planted_params, random_instance, random_params
from rationalex import backward, forward
from rationalex.corpus import EncodedInstance
from rationalex.divergence import compute as compute_divergence
from rationalex.oracle import (
    brute_force_select,
    finite_difference_grad,
    occlusion_scores,
)
from rationalex.scorers import compute_scores
from rationalex.selection import PassCounter, SelectionConfig, select_all

FULL_GRID = SelectionConfig(
    scorer_mode="instance_level", scorers=("random", "attention", "input_x_grad"),
    length_mode="instance_level", type_mode="instance_level",
    ratio=0.4, skip=0.0, divergence="jsd", seed=13,
)


class TestBruteForceSelect:
    def test_matches_production_search(self, oracle_params, oracle_corpus):
        for inst in oracle_corpus["encoded"][:40]:
            fast = select_all(oracle_params, inst, FULL_GRID)
            slow = brute_force_select(oracle_params, inst, FULL_GRID)
            assert fast.to_record() == slow.to_record()

    def test_single_candidate_grid(self, oracle_params, oracle_corpus):
        inst = oracle_corpus["encoded"][0]
        cfg = SelectionConfig(scorer_mode="fixed", scorers=("attention",),
                              length_mode="fixed", type_mode="fixed",
                              rationale_type="topk", ratio=0.4, divergence="jsd")
        result = brute_force_select(oracle_params, inst, cfg)
        assert result.to_record() == select_all(oracle_params, inst, cfg).to_record()

    def test_too_long_rejected(self, oracle_params):
        inst = EncodedInstance("long", tuple([3] * 65), 0)
        with pytest.raises(ValueError, match="too long"):
            brute_force_select(oracle_params, inst, FULL_GRID)

    def test_perturbed_tie_rule_is_detected(self, oracle_params, oracle_corpus):
        """A test double that prefers larger k on ties must disagree with the
        production search somewhere, proving the comparison has teeth."""

        def biased_brute_force(params, inst, config):
            reference = forward(params, inst)
            target = reference.predicted_class
            omegas = {name: compute_scores(name, params, inst, reference=reference,
                                           seed=config.seed).omega.tolist()
                      for name in config.scorers}
            budget = max(1, round(config.ratio * inst.length))
            best = None
            for k in range(1, budget + 1):
                for rationale_type in ("topk", "contiguous"):
                    for name in config.scorers:
                        omega = omegas[name]
                        if rationale_type == "topk":
                            ranked = sorted(range(len(omega)),
                                            key=lambda t: (-omega[t], t))
                            positions = tuple(sorted(ranked[:k]))
                        else:
                            start = max(range(len(omega) - k + 1),
                                        key=lambda s: sum(omega[s:s + k]))
                            positions = tuple(range(start, start + k))
                        masked = forward(params, inst, positions)
                        delta = compute_divergence(config.divergence, reference.probs,
                                                   masked.probs, target=target)
                        if best is None or delta >= best[0]:  # >= flips every tie
                            best = (delta, positions, k, rationale_type, name)
            return best

        disagreements = 0
        for inst in oracle_corpus["encoded"][:40]:
            fast = select_all(oracle_params, inst, FULL_GRID)
            biased = biased_brute_force(oracle_params, inst, FULL_GRID)
            key = (fast.delta, fast.positions, fast.k, fast.rationale_type, fast.scorer)
            disagreements += int(key != biased)
        assert disagreements > 0


class TestOcclusion:
    def test_zero_embedding_token_scores_zero(self):
        params = planted_params(vocab_size=12, drivers={3: (0, 0.8)})
        inst = EncodedInstance("z", (9, 3, 9), 0)
        omega = occlusion_scores(params, inst).omega
        assert omega[0] == 0.0 and omega[2] == 0.0

    def test_planted_token_has_max_score(self):
        params = planted_params(vocab_size=12, drivers={3: (0, 0.8)})
        inst = EncodedInstance("p", (9, 9, 3, 9, 9), 0)
        omega = occlusion_scores(params, inst).omega
        assert int(np.argmax(omega)) == 2
        assert omega[2] > 0.0

    def test_exactly_t_forward_passes(self, toy_params, toy_data):
        inst = toy_data["test"][0]
        counter = PassCounter()
        occlusion_scores(toy_params, inst, counter=counter)
        assert counter.count == inst.length


class TestFiniteDifferences:
    def test_error_shrinks_with_step(self):
        """Central differences are second order: halving the step should
        shrink the gap to the analytic gradient."""
        rng = np.random.default_rng(20)
        params = random_params(rng)
        inst = random_instance(rng, t_min=4, t_max=6)
        analytic = backward(params, inst, 1)
        err = {}
        for step in (4e-3, 2e-3):
            fd = finite_difference_grad(params, inst, 1, step=step)
            err[step] = np.max(np.abs(fd.d_embeddings - analytic.d_embeddings))
        assert err[2e-3] < err[4e-3]

    def test_masked_positions_zero_rows(self):
        rng = np.random.default_rng(21)
        params = random_params(rng)
        inst = random_instance(rng, t_min=5)
        fd = finite_difference_grad(params, inst, 0, mask=(0, 2))
        assert np.all(fd.d_embeddings[[0, 2]] == 0.0)

    def test_step_validated(self):
        rng = np.random.default_rng(22)
        params = random_params(rng)
        inst = random_instance(rng)
        with pytest.raises(ValueError, match="step"):
            finite_difference_grad(params, inst, 0, step=0.5)
