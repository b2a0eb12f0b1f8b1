"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS/FAIL lines.  Tolerances and instance counts are fixed here; timing
budgets are asserted, not just observed.
"""

import math
import time
from contextlib import contextmanager

import numpy as np

from topicshard.cli import main as cli_main
from topicshard.index import Shard, ShardedIndex, oracle_retrieve, retrieve
from topicshard.metrics import kilt_f1, pearson_length_f1, recall_at_k, unigram_f1
from topicshard.synth import SyntheticSpec, generate_synthetic, split_validation_test
from topicshard.topics import TopicModel, TrainConfig, assign_cluster, infer_distribution
from topicshard.experiment import sweep_T

from conftest import flat_topk_ids, make_embeddings, make_random_index, random_weights


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


class TestOracleEquivalence:
    def test_200_randomized_instances_under_60s(self):
        with criterion("oracle-equivalence (200 instances, exact)"):
            start = time.monotonic()
            rng = np.random.default_rng(2024)
            checked = 0
            saw_zero = saw_onehot = False
            while checked < 200:
                index = make_random_index(rng, max_passages=500, max_dim=32, max_t=8)
                q = rng.standard_normal(index.dim)
                w = random_weights(rng, index.T)
                saw_zero = saw_zero or bool(np.any(w == 0.0))
                saw_onehot = saw_onehot or bool(np.sum(w == 1.0) == 1 and np.sum(w) == 1.0)
                k = int(rng.choice([1, 5, 10]))
                fast = retrieve(index, q, w, k)
                slow = oracle_retrieve(index, q, w, k)
                assert fast == slow  # ids, order, and exact float scores
                checked += 1
            assert saw_zero and saw_onehot  # the hard weight shapes occurred
            elapsed = time.monotonic() - start
            assert elapsed < 60.0, f"took {elapsed:.1f}s"


class TestDegeneracy:
    def test_t1_identical_to_flat_dense_topk(self):
        with criterion("degeneracy (T=1 equals flat top-K, 50 queries)"):
            rng = np.random.default_rng(7)
            n, dim = 400, 24
            ids = [f"p{i:04d}" for i in rng.permutation(n)]
            vectors = rng.standard_normal((n, dim)).astype(np.float32)
            index = ShardedIndex([Shard(0, make_embeddings(ids, vectors))])
            for _ in range(50):
                q = rng.standard_normal(dim)
                got = [s.passage_id for s in retrieve(index, q, np.array([1.0]), 10)]
                assert got == flat_topk_ids(ids, vectors, q, 10)


class TestWeightedScoreSemantics:
    def test_zero_weight_shards_score_zero(self):
        with criterion("weighted-score semantics (zero-weight shards)"):
            rng = np.random.default_rng(11)
            for _ in range(20):
                index = make_random_index(rng, max_passages=300, max_dim=16, max_t=8)
                w = rng.random(index.T)
                zero_topics = set(np.flatnonzero(rng.random(index.T) < 0.5))
                for t in zero_topics:
                    w[t] = 0.0
                if w.sum() == 0:
                    w[0] = 1.0
                    zero_topics.discard(0)
                q = rng.standard_normal(index.dim)
                for s in retrieve(index, q, w, 20):
                    if s.topic_id in zero_topics:
                        assert s.score == 0.0

    def test_uniform_rescaling_preserves_ranking(self):
        with criterion("weighted-score semantics (rescaling c in {0.5, 2, 10})"):
            rng = np.random.default_rng(13)
            for _ in range(20):
                index = make_random_index(rng, max_passages=300, max_dim=16, max_t=8)
                q = rng.standard_normal(index.dim)
                w = random_weights(rng, index.T)
                base = [s.passage_id for s in retrieve(index, q, w, 10)]
                for c in (0.5, 2.0, 10.0):
                    scaled = [s.passage_id for s in retrieve(index, q, c * w, 10)]
                    assert scaled == base


class TestTopicDistributionInvariants:
    def test_1000_random_model_vector_pairs(self):
        with criterion("topic-distribution invariants (1000 pairs)"):
            rng = np.random.default_rng(17)
            for _ in range(1000):
                t = int(rng.integers(1, 9))
                dim = int(rng.integers(2, 33))
                model = TopicModel(
                    rng.standard_normal((t, dim)).astype(np.float32),
                    temperature=float(rng.uniform(0.05, 5.0)),
                )
                v = rng.standard_normal(dim)
                w = infer_distribution(model, v).weights
                assert np.all(w >= 0.0)
                assert abs(float(w.sum()) - 1.0) <= 1e-6
                assert assign_cluster(model, v) == int(np.argmax(w))
                c = float(rng.uniform(0.1, 10.0))
                np.testing.assert_allclose(
                    infer_distribution(model, c * v).weights, w, atol=1e-9
                )


class TestPlantedSweep:
    def test_sweep_selects_moderate_t_and_beats_flat(self):
        with criterion("planted sweep (chosen T in {3,4,5}, gap >= 0.02, 9/10 seeds)"):
            start = time.monotonic()
            successes = 0
            for seed in range(10):
                spec = SyntheticSpec(
                    true_T=4, passages_per_topic=50, dim=16, noise_sigma=0.05,
                    queries_per_topic=20, vocab_per_topic=30, seed=seed,
                )
                data = generate_synthetic(spec)
                vq, ve, tq, te = split_validation_test(data.queries, data.query_emb)
                result = sweep_T(
                    data.corpus, data.passage_emb, vq, ve, tq, te, 1, 8,
                    TrainConfig(seed=seed),
                )
                gap = (
                    result.per_T[result.chosen_T].validation_r_at_k
                    - result.per_T[1].validation_r_at_k
                )
                if result.chosen_T in (3, 4, 5) and gap >= 0.02:
                    successes += 1
            elapsed = time.monotonic() - start
            assert successes >= 9, f"only {successes}/10 seeds satisfied the criterion"
            assert elapsed < 300.0, f"took {elapsed:.1f}s"


class TestMetricFixtures:
    def test_frozen_metric_values(self):
        with criterion("metric fixtures (F1, KILT-F1, R@K monotone, Pearson)"):
            assert abs(unigram_f1("a b c", "a b d") - 2 / 3) <= 1e-9
            assert kilt_f1(0.8, 0) == 0.0
            assert kilt_f1(0.8, 1) == 0.8
            assert kilt_f1(0.0, 1) == 0.0
            rng = np.random.default_rng(19)
            for _ in range(100):
                n = int(rng.integers(1, 40))
                ranking = [f"p{i}" for i in rng.permutation(n)]
                gold = {f"p{i}" for i in rng.choice(n, size=min(n, 5), replace=False)}
                values = [recall_at_k(ranking, gold, k) for k in range(1, n + 2)]
                assert all(a <= b for a, b in zip(values, values[1:]))
            r, _ = pearson_length_f1([(1, 1), (2, 2), (3, 3)])
            assert r == 1.0
            r, _ = pearson_length_f1([(1, 3), (2, 2), (3, 1)])
            assert r == -1.0
            pairs = [(2.0, 0.81), (4.0, 0.75), (5.0, 0.66), (9.0, 0.4), (13.0, 0.22)]
            x = np.array([p[0] for p in pairs])
            y = np.array([p[1] for p in pairs])
            dx, dy = x - x.mean(), y - y.mean()
            closed_form = float(np.sum(dx * dy) / math.sqrt(np.sum(dx**2) * np.sum(dy**2)))
            r, _ = pearson_length_f1(pairs)
            assert abs(r - closed_form) <= 1e-9


class TestCrossTopicWeighting:
    def test_weighted_top1_flips_against_raw_dot(self):
        # A 4-shard fixture where the shard holding the topically right
        # passage carries weight 0.55: that passage must win top-1 under the
        # weighted score while losing under the unweighted dot product.
        with criterion("cross-topic weighting fixture (w=(0.21,0.09,0.55,0.15))"):
            q = np.array([1.0, 0.0])
            # all components exactly representable in float32
            index = ShardedIndex(
                [
                    Shard(0, make_embeddings(
                        ["reptile_glider", "reptile_forest"],
                        [[1.5, 0.0], [1.25, 0.0]])),
                    Shard(1, make_embeddings(["music_band"], [[0.25, 0.0]])),
                    Shard(2, make_embeddings(["fiction_character"], [[1.0, 0.0]])),
                    Shard(3, make_embeddings(["city_river"], [[0.5, 0.0]])),
                ]
            )
            w = np.array([0.21, 0.09, 0.55, 0.15])
            unweighted = retrieve(index, q, np.ones(4), 1)
            assert unweighted[0].passage_id == "reptile_glider"  # raw dot winner
            weighted = retrieve(index, q, w, 1)
            assert weighted[0].passage_id == "fiction_character"
            assert weighted[0].score == 1.0 * 0.55
            # the raw-dot winner is demoted by its topic weight
            reptile = next(s for s in retrieve(index, q, w, 5)
                           if s.passage_id == "reptile_glider")
            assert reptile.score == 1.5 * 0.21
            assert reptile.score < weighted[0].score


class TestCLIDeterminism:
    def _run(self, *argv):
        code = cli_main([str(a) for a in argv])
        assert code == 0, f"command failed: {argv}"

    @staticmethod
    def _same(a, b):
        assert a.read_bytes() == b.read_bytes(), f"{a.name} differs between reruns"

    def test_every_subcommand_rerun_is_byte_identical(self, tmp_path):
        with criterion("CLI determinism (all 8 subcommands)"):
            synth_args = ["--true-t", 3, "--passages-per-topic", 8, "--dim", 8,
                          "--queries-per-topic", 4, "--vocab-per-topic", 10, "--seed", 5]
            a, b = tmp_path / "a", tmp_path / "b"
            self._run("synth", "--out", a, *synth_args)
            self._run("synth", "--out", b, *synth_args)
            for name in ("corpus.jsonl", "passages.emb", "queries.jsonl",
                         "queries.emb", "planted_assignment.json"):
                self._same(a / name, b / name)

            corpus, emb = a / "corpus.jsonl", a / "passages.emb"
            queries, qemb = a / "queries.jsonl", a / "queries.emb"

            for n in (1, 2):
                self._run("ingest-check", "--corpus", corpus, "--emb", emb,
                          "--out", tmp_path / f"check{n}.json")
            self._same(tmp_path / "check1.json", tmp_path / "check2.json")

            for n in (1, 2):
                self._run("train-topics", "--emb", emb, "--t", 3, "--seed", 5,
                          "--out", tmp_path / f"model{n}.tpm1")
            self._same(tmp_path / "model1.tpm1", tmp_path / "model2.tpm1")
            model = tmp_path / "model1.tpm1"

            for n in (1, 2):
                self._run("assign", "--model", model, "--emb", emb,
                          "--out", tmp_path / f"assign{n}.json")
            self._same(tmp_path / "assign1.json", tmp_path / "assign2.json")

            for n in (1, 2):
                self._run("build-index", "--corpus", corpus, "--emb", emb,
                          "--model", model, "--out", tmp_path / f"index{n}")
            for shard in ("manifest.json", "shard_0.emb", "shard_1.emb", "shard_2.emb"):
                self._same(tmp_path / "index1" / shard, tmp_path / "index2" / shard)
            index = tmp_path / "index1"

            for n in (1, 2):
                self._run("retrieve", "--index", index, "--queries", queries,
                          "--emb", qemb, "--model", model, "--k", 10,
                          "--out", tmp_path / f"results{n}.jsonl")
            self._same(tmp_path / "results1.jsonl", tmp_path / "results2.jsonl")
            results = tmp_path / "results1.jsonl"

            for n in (1, 2):
                self._run("evaluate", "--corpus", corpus, "--queries", queries,
                          "--retrievals", results, "--metrics", "r@5,p@1",
                          "--out", tmp_path / f"report{n}.json")
            self._same(tmp_path / "report1.json", tmp_path / "report2.json")

            for n in (1, 2):
                self._run("sweep-t", "--corpus", corpus, "--emb", emb,
                          "--val-queries", queries, "--val-emb", qemb,
                          "--test-queries", queries, "--test-emb", qemb,
                          "--t-min", 1, "--t-max", 3, "--seed", 5,
                          "--out", tmp_path / f"sweep{n}.json")
            self._same(tmp_path / "sweep1.json", tmp_path / "sweep2.json")
