"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Each test prints a single PASS line (visible with ``pytest -s``); a failing
criterion shows up as a normal pytest failure for that line.  Everything
runs on synthetic corpora in well under five minutes.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from conftest import random_instance, random_params
from rationalex import backward, forward
from rationalex.corpus import write_dataset
from rationalex.divergence import class_diff, jsd, kl, perplexity
from rationalex.faithfulness import (
    evaluate_instance,
    ablate_scorers,
    norm_comp_from_probs,
    norm_suff_from_probs,
)
from rationalex.harness import (
    ExperimentConfig,
    emit_report,
    run_experiment,
    time_extraction,
)
from rationalex.model import TrainConfig, train
from rationalex.oracle import brute_force_select, finite_difference_grad
from rationalex.scorers import (
    compute_scores,
    deeplift_attributions,
    integrated_gradients_attributions,
    lime_weights,
    rescale_multipliers,
)
from rationalex.selection import (
    SelectionConfig,
    select_all,
    select_length,
    select_scorer,
)
from rationalex.synthetic import SyntheticSpec, generate_corpus

SEVEN = ("random", "attention", "scaled_attention", "input_x_grad",
         "integrated_gradients", "deeplift", "lime")
CHEAP = ("random", "attention", "scaled_attention", "input_x_grad")


def report_pass(n, text):
    print(f"criterion {n:02d} PASS: {text}")


@pytest.fixture(scope="module")
def dominance_runs(toy_params, toy_data):
    """select_all rationales plus every fixed (scorer, N, type) baseline,
    under both classdiff and jsd, shared across criteria 7, 8 and 12."""
    dataset = toy_data["test"]
    runs = {}
    for metric in ("classdiff", "jsd"):
        cfg = SelectionConfig(
            scorer_mode="instance_level", scorers=SEVEN,
            length_mode="instance_level", type_mode="instance_level",
            ratio=0.2, skip=0.0, divergence=metric, seed=17,
            ig_steps=20, lime_samples=200,
        )
        selected = {inst.id: select_all(toy_params, inst, cfg) for inst in dataset}
        fixed = {}
        for name in SEVEN:
            for rtype in ("topk", "contiguous"):
                fixed_cfg = replace(cfg, scorer_mode="fixed", scorers=(name,),
                                    length_mode="fixed", type_mode="fixed",
                                    rationale_type=rtype)
                fixed[(name, rtype)] = {
                    inst.id: select_all(toy_params, inst, fixed_cfg) for inst in dataset
                }
        runs[metric] = {"config": cfg, "selected": selected, "fixed": fixed}
    return runs


class TestCriterion01MetricExactness:
    def test_divergences_and_normalized_metrics(self):
        checks = [
            (kl(np.array([0.3, 0.7]), np.array([0.3, 0.7])), 0.0),
            (kl([0.9, 0.1], [0.5, 0.5]),
             0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)),
            (kl([1.0, 0.0], [0.5, 0.5]), math.log(2)),
            (jsd(np.array([0.4, 0.6]), np.array([0.4, 0.6])), 0.0),
            (jsd([1.0, 0.0], [0.0, 1.0]), math.log(2)),
            (perplexity([1.0, 0.0], [1.0, 0.0]), 1.0),
            (perplexity([1.0, 0.0], [0.5, 0.5]), 2.0),
            (perplexity([0.5, 0.5], [0.5, 0.5]), 2.0),
            (class_diff([0.1, 0.9], [0.4, 0.6], 1), 0.3),
            (class_diff([0.3, 0.7], [0.3, 0.7], 1), 0.0),
            (class_diff([0.4, 0.6], [0.7, 0.3], 0), -0.3),
            (norm_suff_from_probs(0.9, 0.7, 0.5), 0.5),
            (norm_suff_from_probs(0.6, 0.4, 0.9), 1.0),
            (norm_comp_from_probs(0.9, 0.6, 0.5), 0.75),
            (norm_comp_from_probs(0.9, 0.9, 0.5), 0.0),
            (norm_comp_from_probs(0.9, 0.3, 0.5), 1.0),
        ]
        for got, expected in checks:
            assert abs(got - expected) < 1e-9
        jsd_rand = jsd([0.22, 0.78], [0.61, 0.39])
        assert abs(jsd_rand - jsd([0.61, 0.39], [0.22, 0.78])) < 1e-12
        report_pass(1, f"{len(checks)} hand-computed values within 1e-9")


class TestCriterion02GradientCorrectness:
    def test_backward_matches_finite_differences_on_50_instances(self):
        rng = np.random.default_rng(100)
        worst = 0.0
        for trial in range(50):
            params = random_params(rng)
            inst = random_instance(rng, name=f"g{trial}")
            target = int(rng.integers(params.num_classes))
            analytic = backward(params, inst, target)
            numeric = finite_difference_grad(params, inst, target, step=1e-5)
            for a, b in ((analytic.d_embeddings, numeric.d_embeddings),
                         (analytic.d_attention, numeric.d_attention)):
                denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
                worst = max(worst, float(np.max(np.abs(a - b) / denom)))
        assert worst < 1e-4
        report_pass(2, f"max relative error {worst:.2e} over 50 instances")


class TestCriterion03IGCompleteness:
    def test_attribution_sum_matches_probability_gap(self, toy_params, toy_data):
        dataset = (toy_data["test"] + toy_data["train"])[:50]
        worst = 0.0
        for inst in dataset:
            ref = forward(toy_params, inst)
            yhat = ref.predicted_class
            attr = integrated_gradients_attributions(toy_params, inst, steps=200,
                                                     reference=ref)
            gap = ref.probs[yhat] - forward(toy_params, inst, range(inst.length)).probs[yhat]
            worst = max(worst, abs(float(attr.sum() - gap)))
        assert worst < 1e-3
        report_pass(3, f"worst completeness gap {worst:.2e} on 50 instances at 200 steps")


class TestCriterion04DeepLiftSumToDelta:
    def test_hand_relu_example_exact(self):
        multiplier = rescale_multipliers(1.0, 2.0, 1.0)
        assert float(multiplier) == 0.5
        contributions = float(multiplier) * np.array([1.0, 1.0])
        assert contributions.tolist() == [0.5, 0.5]
        assert contributions.sum() == 1.0

    def test_sum_to_delta_on_50_instances(self, toy_params, toy_data):
        dataset = (toy_data["test"] + toy_data["train"])[:50]
        worst = 0.0
        for inst in dataset:
            ref = forward(toy_params, inst)
            yhat = ref.predicted_class
            attr = deeplift_attributions(toy_params, inst, reference=ref)
            gap = ref.probs[yhat] - forward(toy_params, inst, range(inst.length)).probs[yhat]
            worst = max(worst, abs(float(attr.sum() - gap)))
        assert worst < 1e-6
        report_pass(4, f"worst sum-to-delta error {worst:.2e} on 50 instances")


class TestCriterion05LimeFidelity:
    def test_spearman_against_planted_coefficients(self):
        T = 10
        beta = np.linspace(-0.45, 0.45, T)
        rhos = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)

            def predict(masked):
                kept = np.ones(T)
                kept[masked] = 0.0
                return 0.25 + float(kept @ beta)

            coefs = lime_weights(predict, T, n_samples=500, rng=rng)
            rhos.append(float(stats.spearmanr(coefs, beta).statistic))
        assert min(rhos) >= 0.9
        report_pass(5, f"Spearman min {min(rhos):.3f} over 20 seeds at 500 samples")


class TestCriterion06SelectionOptimality:
    CFG = SelectionConfig(
        scorer_mode="instance_level", scorers=CHEAP,
        length_mode="instance_level", type_mode="instance_level",
        ratio=0.4, skip=0.0, divergence="jsd", seed=23,
    )

    def test_zero_mismatches_on_200_instances(self, oracle_params, oracle_corpus):
        dataset = oracle_corpus["encoded"]
        assert len(dataset) == 200
        scorer_cfg = replace(self.CFG, length_mode="fixed", type_mode="fixed",
                             rationale_type="topk")
        length_cfg = replace(self.CFG, scorer_mode="fixed", scorers=("attention",),
                             type_mode="fixed", rationale_type="topk")
        mismatches = 0
        for inst in dataset:
            if select_all(oracle_params, inst, self.CFG).to_record() \
                    != brute_force_select(oracle_params, inst, self.CFG).to_record():
                mismatches += 1
            if select_scorer(oracle_params, inst, scorer_cfg).to_record() \
                    != brute_force_select(oracle_params, inst, scorer_cfg).to_record():
                mismatches += 1
            omega = compute_scores("attention", oracle_params, inst,
                                   seed=length_cfg.seed)
            if select_length(oracle_params, inst, omega, length_cfg).to_record() \
                    != brute_force_select(oracle_params, inst, length_cfg).to_record():
                mismatches += 1
        assert mismatches == 0
        report_pass(6, "select_scorer/select_length/select_all all match brute "
                       "force on 200 instances")


class TestCriterion07Dominance:
    def test_classdiff_per_instance_dominance(self, toy_params, toy_data,
                                              dominance_runs):
        run = dominance_runs["classdiff"]
        violations = 0
        for inst in toy_data["test"]:
            sel_comp = evaluate_instance(toy_params, inst,
                                         run["selected"][inst.id]).norm_comp
            for fixed_rationales in run["fixed"].values():
                fixed_comp = evaluate_instance(toy_params, inst,
                                               fixed_rationales[inst.id]).norm_comp
                if sel_comp < fixed_comp:
                    violations += 1
        assert violations == 0
        report_pass(7, "classdiff NormComp dominance on 100% of instances; "
                       "jsd mean strictly above best fixed baseline")

    def test_jsd_mean_beats_best_fixed_baseline(self, toy_params, toy_data,
                                                dominance_runs):
        run = dominance_runs["jsd"]
        sel_mean = np.mean([
            evaluate_instance(toy_params, inst, run["selected"][inst.id]).norm_comp
            for inst in toy_data["test"]
        ])
        best_fixed = max(
            np.mean([evaluate_instance(toy_params, inst, rset[inst.id]).norm_comp
                     for inst in toy_data["test"]])
            for rset in run["fixed"].values()
        )
        assert sel_mean > best_fixed

    def test_classdiff_dominance_is_exact_not_rounded(self, toy_params, toy_data,
                                                      dominance_runs):
        """The selected delta must equal or exceed every fixed candidate's
        delta because the fixed candidates are grid members."""
        run = dominance_runs["classdiff"]
        for inst in toy_data["test"]:
            sel_delta = run["selected"][inst.id].delta
            for rset in run["fixed"].values():
                assert sel_delta >= rset[inst.id].delta


class TestCriterion08ShorterRationales:
    def test_mean_length_fraction_below_095_n(self, toy_data, dominance_runs):
        cfg = dominance_runs["jsd"]["config"]
        fractions = [
            dominance_runs["jsd"]["selected"][inst.id].k / inst.length
            for inst in toy_data["test"]
        ]
        assert np.mean(fractions) <= 0.95 * cfg.ratio
        report_pass(8, f"mean selected length fraction {np.mean(fractions):.3f} "
                       f"<= 0.95 * N = {0.95 * cfg.ratio:.3f}")


class TestCriterion09AblationMonotonicity:
    def test_per_instance_delta_never_increases(self, oracle_params, oracle_corpus):
        dataset = oracle_corpus["encoded"][:40]
        cfg = SelectionConfig(scorer_mode="instance_level", scorers=CHEAP,
                              length_mode="instance_level", type_mode="instance_level",
                              ratio=0.4, skip=0.0, divergence="classdiff", seed=29)
        reports = ablate_scorers(oracle_params, dataset, cfg)
        assert len(reports) == len(CHEAP)
        for earlier, later in zip(reports, reports[1:]):
            for inst in dataset:
                assert later.rationales[inst.id].delta \
                    <= earlier.rationales[inst.id].delta
        report_pass(9, f"delta non-increasing across {len(reports)} shrinking "
                       "scorer sets on 100% of instances")


class TestCriterion10SkipRateSpeedup:
    def test_long_sequences_speed_and_pass_counts(self):
        spec = SyntheticSpec(n_instances=6, num_classes=2, t_min=300, t_max=340,
                             signal_count=6, noise=0.0, seed=41, id_prefix="long")
        instances = generate_corpus(spec)
        from rationalex.corpus import build_vocab, encode_dataset
        vocab = build_vocab(instances)
        encoded = encode_dataset(instances, vocab, 2)
        params = train(encoded, TrainConfig(vocab_size=vocab.size, num_classes=2,
                                            embed_dim=12, hidden_dim=12,
                                            epochs=3, seed=0))
        cfg = SelectionConfig(scorer_mode="fixed", scorers=("attention",),
                              length_mode="instance_level", type_mode="fixed",
                              rationale_type="topk", ratio=0.2, divergence="jsd")
        rows = time_extraction(params, encoded, cfg, skips=(0.0, 0.05))
        exhaustive, skipped = rows
        assert exhaustive["passes"] == exhaustive["analytic_passes"]
        assert skipped["passes"] == skipped["analytic_passes"]
        ratio = skipped["seconds_per_instance"] / exhaustive["seconds_per_instance"]
        assert ratio <= 1 / 3
        report_pass(10, f"skip=0.05 runs at {ratio:.2f} of skip=0 time "
                        f"({skipped['passes']} vs {exhaustive['passes']} passes, "
                        "both matching the analytic grid)")


class TestCriterion11Determinism:
    def test_byte_identical_experiment_outputs(self, tmp_path):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        instances = generate_corpus(SyntheticSpec(n_instances=40, num_classes=2,
                                                  t_min=6, t_max=10, noise=0.05,
                                                  seed=7, id_prefix="det"))
        write_dataset(data_dir / "train.jsonl", instances[:30])
        write_dataset(data_dir / "test.jsonl", instances[30:])
        config = ExperimentConfig(
            train_path=str(data_dir / "train.jsonl"),
            test_path=str(data_dir / "test.jsonl"),
            num_classes=2, embed_dim=10, hidden_dim=10, epochs=8,
            selection=SelectionConfig(
                scorer_mode="instance_level", scorers=("random", "attention"),
                length_mode="instance_level", type_mode="instance_level",
                ratio=0.4, divergence="jsd", seed=7),
            out_dir=str(tmp_path / "out"), seed=7,
        )
        first = {p.name: p.read_bytes()
                 for p in emit_report(run_experiment(config), config.out_dir)}
        second = {p.name: p.read_bytes()
                  for p in emit_report(run_experiment(config), config.out_dir)}
        assert first == second
        report_pass(11, f"two identical runs emitted {len(first)} byte-identical files")


class TestCriterion12Bounds:
    def test_metric_ranges_across_runs(self, toy_params, toy_data, dominance_runs):
        ln2 = math.log(2)
        checked = 0
        for metric, run in dominance_runs.items():
            for inst in toy_data["test"]:
                for rationale in [run["selected"][inst.id]] + [
                        rset[inst.id] for rset in run["fixed"].values()]:
                    ev = evaluate_instance(toy_params, inst, rationale)
                    assert 0.0 <= ev.norm_suff <= 1.0
                    assert 0.0 <= ev.norm_comp <= 1.0
                    ref = forward(toy_params, inst)
                    masked = forward(toy_params, inst, rationale.positions)
                    assert kl(ref.probs, masked.probs) >= 0.0
                    assert 0.0 <= jsd(ref.probs, masked.probs) <= ln2 + 1e-12
                    checked += 1
        assert checked >= 700
        report_pass(12, f"bounds hold over {checked} rationale evaluations")
