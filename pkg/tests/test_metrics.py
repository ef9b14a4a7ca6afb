from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockrag.errors import ValidationError
from blockrag.metrics import (
    EvalSample,
    anlcs,
    evaluate_run,
    lcs_length,
    ndcg_at_k,
    recall_at_k,
    rouge_l,
    tokenize,
    word_overlap_f1,
)
from oracles import (
    anlcs_reference,
    lcs_reference,
    ndcg_reference,
    recall_reference,
    rouge_reference,
    word_f1_reference,
)

WORDS = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]


def random_text(rng, max_len=40) -> str:
    n = int(rng.integers(0, max_len + 1))
    return " ".join(WORDS[i] for i in rng.integers(0, len(WORDS), n))


def random_ranking(rng, pool=30, depth=12):
    ids = [f"d{i}" for i in range(pool)]
    ranked = list(rng.permutation(ids)[:depth])
    gold = set(rng.choice(ids, size=int(rng.integers(1, 5)), replace=False))
    return [str(r) for r in ranked], {str(g) for g in gold}


class TestTokenize:
    def test_lowercase_and_strip(self):
        assert tokenize('  "Hello," World!  ') == ["hello", "world"]

    def test_inner_punctuation_kept(self):
        assert tokenize("don't co-op") == ["don't", "co-op"]

    def test_pure_punctuation_dropped(self):
        assert tokenize("... --- !!!") == []

    def test_unicode_whitespace(self):
        assert tokenize("a b c") == ["a", "b", "c"]


class TestNdcg:
    def test_perfect_single_gold(self):
        assert ndcg_at_k(["g", "x", "y"], {"g"}, 1) == 1.0

    def test_gold_at_rank_two(self):
        got = ndcg_at_k(["x", "g", "y"], {"g"}, 3)
        assert got == pytest.approx(1 / math.log2(3), rel=1e-12)

    def test_no_gold_in_topk(self):
        assert ndcg_at_k(["x", "y", "z"], {"g"}, 3) == 0.0

    def test_empty_gold_rejected(self):
        with pytest.raises(ValidationError):
            ndcg_at_k(["x"], set(), 3)

    def test_duplicate_ranked_rejected(self):
        with pytest.raises(ValidationError):
            ndcg_at_k(["x", "x"], {"x"}, 2)

    def test_fuzz_against_reference(self, rng):
        for _ in range(1000):
            ranked, gold = random_ranking(rng)
            k = int(rng.integers(1, 15))
            assert ndcg_at_k(ranked, gold, k) == pytest.approx(
                ndcg_reference(ranked, gold, k), abs=1e-12
            )

    def test_invariant_to_reordering_below_k(self, rng):
        ranked, gold = random_ranking(rng, depth=10)
        k = 4
        shuffled = ranked[:k] + list(rng.permutation(ranked[k:]))
        assert ndcg_at_k(ranked, gold, k) == ndcg_at_k(shuffled, gold, k)

    def test_deep_k_equals_full_depth(self, rng):
        ranked, gold = random_ranking(rng, depth=8)
        assert ndcg_at_k(ranked, gold, 8) == ndcg_at_k(ranked, gold, 100)


class TestRecall:
    def test_half_recall(self):
        assert recall_at_k(["g1", "x", "y"], {"g1", "g2"}, 3) == 0.5

    def test_page_hit(self):
        assert recall_at_k(["p3"], {"p3"}, 1) == 1.0

    def test_fuzz_against_reference(self, rng):
        for _ in range(1000):
            ranked, gold = random_ranking(rng)
            k = int(rng.integers(1, 15))
            assert recall_at_k(ranked, gold, k) == recall_reference(ranked, gold, k)

    def test_monotone_in_k(self, rng):
        for _ in range(100):
            ranked, gold = random_ranking(rng)
            values = [recall_at_k(ranked, gold, k) for k in range(1, 14)]
            assert values == sorted(values)


class TestRougeL:
    def test_identical(self):
        assert rouge_l("the cat sat", "the cat sat") == 1.0

    def test_hand_case(self):
        # LCS("a b c d", "a c d e") = 3; P = R = 3/4
        assert rouge_l("a b c d", "a c d e") == pytest.approx(0.75)

    def test_empty_conventions(self):
        assert rouge_l("", "") == 1.0
        assert rouge_l("words here", "") == 0.0
        assert rouge_l("", "words here") == 0.0

    def test_symmetric_at_beta_one(self, rng):
        for _ in range(50):
            a, b = random_text(rng), random_text(rng)
            assert rouge_l(a, b) == pytest.approx(rouge_l(b, a), abs=1e-12)

    def test_beta_configurable(self):
        # recall-weighted beta favors the reference side
        low = rouge_l("a b", "a b c d", beta=0.5)
        high = rouge_l("a b", "a b c d", beta=2.0)
        assert high < low

    def test_fuzz_against_reference(self, rng):
        for _ in range(1000):
            a, b = random_text(rng), random_text(rng)
            want = rouge_reference(tokenize(a), tokenize(b))
            assert rouge_l(a, b) == pytest.approx(want, abs=1e-9)

    def test_long_inputs(self, rng):
        for _ in range(5):
            a, b = random_text(rng, 200), random_text(rng, 200)
            want = rouge_reference(tokenize(a), tokenize(b))
            assert rouge_l(a, b) == pytest.approx(want, abs=1e-9)


class TestAnlcs:
    def test_full_subsequence(self):
        assert anlcs("prefix a b c suffix", "a b c") == 1.0

    def test_partial(self):
        assert anlcs("a x c", "a b c") == pytest.approx(2 / 3)

    def test_disjoint(self):
        assert anlcs("x y z", "a b c") == 0.0

    def test_empty_gold_rejected(self):
        with pytest.raises(ValidationError):
            anlcs("something", "")

    def test_fuzz_against_reference(self, rng):
        count = 0
        while count < 1000:
            ret, gold = random_text(rng), random_text(rng)
            if not tokenize(gold):
                continue
            count += 1
            want = anlcs_reference(tokenize(ret), tokenize(gold))
            assert anlcs(ret, gold) == pytest.approx(want, abs=1e-9)


class TestWordOverlapF1:
    def test_identical(self):
        assert word_overlap_f1("alpha beta", "alpha beta") == 1.0

    def test_multiset_case(self):
        # overlap multiset {a, b}: P = R = 2/3
        assert word_overlap_f1("a a b", "a b b") == pytest.approx(2 / 3)

    def test_disjoint(self):
        assert word_overlap_f1("a b", "c d") == 0.0

    def test_empty_conventions(self):
        assert word_overlap_f1("", "") == 1.0
        assert word_overlap_f1("a", "") == 0.0

    def test_fuzz_against_reference(self, rng):
        for _ in range(1000):
            a, b = random_text(rng), random_text(rng)
            want = word_f1_reference(tokenize(a), tokenize(b))
            assert word_overlap_f1(a, b) == pytest.approx(want, abs=1e-12)

    @given(st.text(max_size=80), st.text(max_size=80))
    def test_bounded_and_symmetric(self, a, b):
        v = word_overlap_f1(a, b)
        assert 0.0 <= v <= 1.0
        assert v == word_overlap_f1(b, a)


class TestLcs:
    @given(
        st.lists(st.sampled_from(WORDS), max_size=25),
        st.lists(st.sampled_from(WORDS), max_size=25),
    )
    def test_matches_rolling_reference(self, a, b):
        assert lcs_length(a, b) == lcs_reference(a, b)


def sample(qid, gold, page, answer="gold answer text", cost=None) -> EvalSample:
    return EvalSample(
        query_id=qid, query_text=f"about {qid}", gold_block_ids=frozenset(gold),
        gold_page_id=page, answer_text=answer, page_token_cost=cost,
    )


class TestEvaluateRun:
    def test_perfect_retrieval_all_ones(self):
        s = sample("q0", {"p0:0"}, "p0")
        report = evaluate_run(
            [s], {"q0": ["p0:0", "p0:1"]},
            page_rankings={"q0": ["p0", "p1"]}, ks=(1, 3),
        )
        assert all(v == 1.0 for v in report.block_ndcg.values())
        assert all(v == 1.0 for v in report.block_recall.values())
        assert all(v == 1.0 for v in report.page_recall.values())

    def test_mean_over_samples(self):
        samples = [sample("q0", {"b0"}, "p0"), sample("q1", {"b1", "b9"}, "p0")]
        rankings = {"q0": ["b0", "x", "y"], "q1": ["b1", "x", "y"]}
        report = evaluate_run(samples, rankings, ks=(3,))
        assert report.block_recall[3] == pytest.approx(0.75)

    def test_missing_result_names_query(self):
        with pytest.raises(ValidationError, match="q1"):
            evaluate_run(
                [sample("q0", {"b"}, "p"), sample("q1", {"b"}, "p")],
                {"q0": ["b"]},
            )

    def test_generation_metrics_only_with_answers(self):
        s = sample("q0", {"b"}, "p", answer="alpha beta gamma")
        bare = evaluate_run([s], {"q0": ["b"]}, ks=(1,))
        assert bare.rouge_l is None and bare.word_f1 is None
        scored = evaluate_run(
            [s], {"q0": ["b"]}, answers={"q0": "alpha beta gamma"}, ks=(1,)
        )
        assert scored.rouge_l == 1.0 and scored.word_f1 == 1.0

    def test_token_accounting(self):
        samples = [sample("q0", {"b"}, "p0"), sample("q1", {"b"}, "p0")]
        report = evaluate_run(
            samples, {"q0": ["b"], "q1": ["b"]},
            token_totals={"q0": 100, "q1": 300},
            page_rankings={"q0": ["p0"], "q1": ["p0"]},
            page_token_costs={"p0": 900},
            ks=(1,),
        )
        assert report.mean_tokens == 200.0
        assert report.mean_page_tokens == 900.0

    def test_permutation_invariant(self, rng):
        samples = [sample(f"q{i}", {f"b{i}"}, "p0") for i in range(8)]
        rankings = {
            f"q{i}": [f"b{j}" for j in rng.permutation(10)] for i in range(8)
        }
        fwd = evaluate_run(samples, rankings, ks=(1, 3))
        rev = evaluate_run(list(reversed(samples)), rankings, ks=(1, 3))
        assert fwd == rev

    def test_threads_do_not_change_result(self):
        samples = [sample(f"q{i}", {f"b{i % 3}"}, "p0") for i in range(10)]
        rankings = {f"q{i}": ["b0", "b1", "b2"] for i in range(10)}
        one = evaluate_run(samples, rankings, ks=(1, 3))
        four = evaluate_run(samples, rankings, ks=(1, 3), threads=4)
        assert one == four

    def test_spreadsheet_style_recomputation(self, rng):
        # independent recomputation of the whole 20-sample report
        samples, rankings, answers = [], {}, {}
        for i in range(20):
            qid = f"q{i:02d}"
            ranked, gold = random_ranking(rng, pool=15, depth=10)
            samples.append(sample(qid, gold, "p0", answer=random_text(rng, 12)))
            rankings[qid] = ranked
            answers[qid] = random_text(rng, 12)
        report = evaluate_run(samples, rankings, answers=answers, ks=(1, 3, 5))
        for k in (1, 3, 5):
            nd = [ndcg_reference(rankings[s.query_id], set(s.gold_block_ids), k)
                  for s in samples]
            rc = [recall_reference(rankings[s.query_id], set(s.gold_block_ids), k)
                  for s in samples]
            assert report.block_ndcg[k] == pytest.approx(sum(nd) / 20, abs=1e-12)
            assert report.block_recall[k] == pytest.approx(sum(rc) / 20, abs=1e-12)
        rl = [rouge_reference(tokenize(answers[s.query_id]), tokenize(s.answer_text))
              for s in samples]
        assert report.rouge_l == pytest.approx(sum(rl) / 20, abs=1e-9)

    def test_report_json_shape(self):
        s = sample("q0", {"b"}, "p0")
        report = evaluate_run([s], {"q0": ["x", "b"]}, ks=(1, 3))
        doc = report.to_json_dict()
        assert list(doc) == ["num_samples", "ks", "summary", "raw"]
        assert doc["summary"]["block"]["ndcg"]["3"] == round(
            doc["raw"]["block"]["ndcg"]["3"], 4
        )
        assert doc["raw"]["page"] is None

    def test_judge_slot_averaged(self):
        samples = [sample("q0", {"b"}, "p0"), sample("q1", {"b"}, "p0")]
        report = evaluate_run(
            samples, {"q0": ["b"], "q1": ["b"]},
            judge_scores={"q0": 4.0, "q1": 5.0}, ks=(1,),
        )
        assert report.judge_score == 4.5
