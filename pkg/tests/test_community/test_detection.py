"""
Community detection tests.

The planted fixture is three stars of 12 entities (hub + 11 leaves). Every
surface string in star c is pinned to the basis vector e_c and the star's
edges cycle over three labels nobody else uses, so the stars are separated
in both the relational and the semantic view.
"""

import random
from collections import Counter

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from app.schemas.community import DetectionParams, Partition
from app.services.community.detector import cluster_count, detect_communities, fuse, init_clusters, merge_pass
from app.services.community.scoring import ScoringContext, multiset_jaccard
from app.services.embeddings.representation import entity_representations
from app.services.embeddings.vectors import EmbeddingCache
from app.services.graph.store import Graph
from app.services.providers.scripted import ScriptedEmbeddingProvider

STARS = ("alpha", "beta", "gamma")


def planted_graph() -> tuple[Graph, ScriptedEmbeddingProvider, dict[str, int]]:
    graph = Graph()
    provider = ScriptedEmbeddingProvider(dimension=4, seed=0)
    truth: dict[str, int] = {}
    for c, star in enumerate(STARS):
        basis = [1.0 if i == c else 0.0 for i in range(4)]
        hub = f"{star} hub"
        provider.pin(hub, basis)
        for r in range(3):
            provider.pin(f"{star}_rel{r}", basis)
        for leaf in range(11):
            name = f"{star} leaf {leaf}"
            provider.pin(name, basis)
            graph.add_fact(hub, "Node", f"{star}_rel{leaf % 3}", name, "Node")
        for name in [hub] + [f"{star} leaf {leaf}" for leaf in range(11)]:
            truth[graph.find_entity(name)] = c
    return graph, provider, truth


def twin_triangles() -> tuple[Graph, dict[str, np.ndarray], list[list[str]]]:
    """Two disjoint 3-cycles over one relation label; every vector identical."""
    graph = Graph()
    groups = []
    for prefix in ("x", "y"):
        names = [f"{prefix}{i}" for i in range(3)]
        for i in range(3):
            graph.add_fact(names[i], "Node", "r", names[(i + 1) % 3], "Node")
        groups.append([graph.find_entity(n) for n in names])
    representations = {eid: np.ones(6) for eid in graph.entity_ids()}
    return graph, representations, groups


def three_pairs() -> tuple[Graph, dict[str, np.ndarray], list[list[str]]]:
    """
    Three disjoint edges over one label, every vector identical. Each pair
    diverges from each other pair by 0.5; once two pairs merge, the remaining
    pair diverges from the merged group by 0.75.
    """
    graph = Graph()
    groups = []
    for prefix in ("x", "y", "z"):
        graph.add_fact(f"{prefix}0", "Node", "r", f"{prefix}1", "Node")
        groups.append([graph.find_entity(f"{prefix}0"), graph.find_entity(f"{prefix}1")])
    representations = {eid: np.ones(6) for eid in graph.entity_ids()}
    return graph, representations, groups


def small_stars() -> tuple[Graph, dict[str, np.ndarray], list[list[str]]]:
    """Two hub-and-two-leaf stars with private labels and orthogonal vectors."""
    graph = Graph()
    provider = ScriptedEmbeddingProvider(dimension=4, seed=0)
    groups = []
    for c, star in enumerate(("north", "south")):
        basis = [1.0 if i == c else 0.0 for i in range(4)]
        names = [f"{star} hub", f"{star} leaf 0", f"{star} leaf 1"]
        provider.pin(f"{star}_rel", basis)
        for name in names:
            provider.pin(name, basis)
        for leaf in names[1:]:
            graph.add_fact(names[0], "Node", f"{star}_rel", leaf, "Node")
        groups.append([graph.find_entity(n) for n in names])
    representations = {
        eid: r.vector for eid, r in entity_representations(graph, EmbeddingCache(provider)).items()
    }
    return graph, representations, groups


SMALL_FIXTURES = {"twin_triangles": twin_triangles, "three_pairs": three_pairs, "small_stars": small_stars}


class _DivergenceTable:
    """Stands in for ScoringContext in merge_pass: fixed pairwise divergences."""

    def __init__(self, table: dict[tuple[int, int], float]):
        self.table = table

    def divergence(self, a: int, b: int) -> float:
        return self.table.get((a, b), 10.0)


def _labels(communities, entity_ids) -> list[int]:
    lookup = {eid: c.index for c in communities for eid in c.members}
    return [lookup[eid] for eid in entity_ids]


class TestClusterCount:
    @pytest.mark.parametrize("n,expected", [(5, 2), (50, 5), (2000, 200), (100000, 200)])
    def test_defaults(self, n, expected):
        assert cluster_count(n) == expected

    def test_invalid(self):
        with pytest.raises(ValueError):
            cluster_count(0)


class TestMultisetJaccard:
    def test_hand_case(self):
        assert multiset_jaccard(Counter(a=2, b=1), Counter(a=1, b=2)) == pytest.approx(0.5)

    def test_empty_is_zero(self):
        assert multiset_jaccard(Counter(), Counter()) == 0.0

    def test_random_pairs_match_counter_algebra(self):
        rng = random.Random(17)
        labels = "abcdef"
        for _ in range(1000):
            a = Counter(rng.choices(labels, k=rng.randint(0, 8)))
            b = Counter(rng.choices(labels, k=rng.randint(0, 8)))
            union = sum((a | b).values())
            expected = sum((a & b).values()) / union if union else 0.0
            score = multiset_jaccard(a, b)
            assert score == pytest.approx(expected)
            assert score == pytest.approx(multiset_jaccard(b, a))
            assert 0.0 <= score <= 1.0


class TestScoring:
    def test_twin_divergence(self):
        graph, representations, groups = twin_triangles()
        context = ScoringContext(graph, representations, DetectionParams(semantic_weight=0.5), groups)
        # own {r:2} vs the other two members {r:4} → 0.5; vs the twin {r:6} → 1/3
        assert context.phi(groups[0][0], 0) == pytest.approx(1.0)
        assert context.phi(groups[0][0], 1) == pytest.approx(1 / 3 + 0.5)
        assert context.divergence(0, 1) == pytest.approx(1 / 6)

    @pytest.mark.parametrize("fixture", sorted(SMALL_FIXTURES))
    @pytest.mark.parametrize("epsilon", [0.0, 0.1, 0.5, 1.0, 2.0])
    def test_center_decision_matches_exact_divergence(self, fixture, epsilon):
        graph, representations, groups = SMALL_FIXTURES[fixture]()
        assert len(graph.clusterable_entities()) <= 8
        context = ScoringContext(graph, representations, DetectionParams(merge_threshold=epsilon), groups)
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                assert (context.divergence(a, b) < epsilon) == (context.exact_divergence(a, b) < epsilon)

    @pytest.mark.parametrize("fixture", ["twin_triangles", "three_pairs"])
    def test_symmetric_groups_center_equals_exact(self, fixture):
        graph, representations, groups = SMALL_FIXTURES[fixture]()
        context = ScoringContext(graph, representations, DetectionParams(), groups)
        assert context.divergence(0, 1) == pytest.approx(context.exact_divergence(0, 1))

    def test_centers_computed_once_per_group(self, monkeypatch):
        graph, representations, groups = three_pairs()
        context = ScoringContext(graph, representations, DetectionParams(), groups)
        ranked = context.ranked_members
        calls = []

        def counting(group):
            calls.append(group)
            return ranked(group)

        monkeypatch.setattr(context, "ranked_members", counting)
        for a, b in [(0, 1), (0, 2), (1, 2), (0, 1)]:
            context.divergence(a, b)
        assert sorted(calls) == [0, 1, 2]

    @pytest.mark.parametrize("weight", [0.0, 0.5, 1.0])
    def test_disjoint_stars_diverge_fully(self, weight):
        graph, provider, truth = planted_graph()
        groups = [[eid for eid, c in truth.items() if c == star] for star in range(3)]
        reps = {eid: r.vector for eid, r in entity_representations(graph, EmbeddingCache(provider)).items()}
        context = ScoringContext(graph, reps, DetectionParams(semantic_weight=weight), groups)
        assert context.divergence(0, 1) == pytest.approx(1.0 + weight)

    def test_phi_bounded(self, medical_graph, embedding):
        reps = {
            eid: r.vector
            for eid, r in entity_representations(medical_graph, EmbeddingCache(embedding)).items()
        }
        groups = [medical_graph.clusterable_entities()]
        params = DetectionParams(semantic_weight=0.7)
        context = ScoringContext(medical_graph, reps, params, groups)
        for eid in groups[0]:
            assert 0.0 <= context.phi(eid, 0) <= 1.0 + params.semantic_weight + 1e-9

    def test_hub_is_center(self):
        graph, provider, truth = planted_graph()
        groups = [[eid for eid, c in truth.items() if c == 0]]
        reps = {eid: r.vector for eid, r in entity_representations(graph, EmbeddingCache(provider)).items()}
        context = ScoringContext(graph, reps, DetectionParams(), groups)
        assert context.center(0) == graph.find_entity("alpha hub")


class TestMergePass:
    def test_twins_merge_under_loose_threshold(self):
        graph, representations, groups = twin_triangles()
        params = DetectionParams(merge_threshold=0.5)
        merged_groups, merged = merge_pass(groups, ScoringContext(graph, representations, params, groups), params)
        assert merged == [(0, 1)]
        assert merged_groups == [sorted(groups[0] + groups[1], key=int)]

    def test_threshold_is_strict(self):
        graph, representations, groups = twin_triangles()
        params = DetectionParams(merge_threshold=0.0)
        merged_groups, merged = merge_pass(groups, ScoringContext(graph, representations, params, groups), params)
        assert merged == []
        assert merged_groups == groups

    @pytest.mark.parametrize(
        "table,merged,remaining",
        [
            ({(0, 1): 0.1, (1, 2): 0.2}, [(0, 1)], [["1", "2"], ["3"]]),
            ({(0, 1): 0.2, (1, 2): 0.1}, [(1, 2)], [["1"], ["2", "3"]]),
            ({(0, 1): 0.1, (1, 2): 0.2, (0, 2): 0.3}, [(0, 1)], [["1", "2"], ["3"]]),
        ],
    )
    def test_each_group_merges_once_per_pass(self, table, merged, remaining):
        params = DetectionParams(merge_threshold=0.5)
        new_groups, pairs = merge_pass([["1"], ["2"], ["3"]], _DivergenceTable(table), params)
        assert pairs == merged
        assert new_groups == remaining

    @pytest.mark.parametrize(
        "table,merged,remaining",
        [
            ({(0, 1): 0.1, (2, 3): 0.2}, [(0, 1), (2, 3)], [["1", "2"], ["3", "4"]]),
            ({(0, 1): 0.1, (2, 3): 0.2, (1, 2): 0.05}, [(1, 2)], [["1"], ["2", "3"], ["4"]]),
        ],
    )
    def test_disjoint_candidates_share_a_pass(self, table, merged, remaining):
        params = DetectionParams(merge_threshold=0.5)
        new_groups, pairs = merge_pass([["1"], ["2"], ["3"], ["4"]], _DivergenceTable(table), params)
        assert pairs == merged
        assert new_groups == remaining

    @pytest.mark.parametrize("epsilon,final_groups", [(0.6, 2), (1.0, 1)])
    def test_third_group_waits_for_a_later_pass(self, epsilon, final_groups):
        graph, representations, groups = three_pairs()
        params = DetectionParams(merge_threshold=epsilon)
        context = ScoringContext(graph, representations, params, groups)
        first, pairs = merge_pass(groups, context, params)
        assert pairs == [(0, 1)]
        assert first == [sorted(groups[0] + groups[1], key=int), groups[2]]

        partition = Partition(assignments={eid: i for i, group in enumerate(groups) for eid in group})
        fused, _, passes = fuse(graph, partition, representations, params)
        assert len(fused) == final_groups
        assert passes == 2



class TestDetectCommunities:
    @pytest.mark.parametrize("weight", [0.0, 1.0])
    def test_recovers_planted_partition(self, weight):
        graph, provider, truth = planted_graph()
        communities = detect_communities(graph, EmbeddingCache(provider), DetectionParams(semantic_weight=weight))
        ids = sorted(truth, key=int)
        assert len(communities) == 3
        assert adjusted_rand_score([truth[e] for e in ids], _labels(communities, ids)) == 1.0

    def test_centers_and_partition(self):
        graph, provider, truth = planted_graph()
        communities = detect_communities(graph, EmbeddingCache(provider), DetectionParams())
        covered = [eid for c in communities for eid in c.members]
        assert sorted(covered, key=int) == graph.clusterable_entities()
        assert {graph.entity(c.center).name for c in communities} == {f"{s} hub" for s in STARS}

    def test_ignores_community_nodes(self):
        graph, provider, _ = planted_graph()
        cache = EmbeddingCache(provider)
        before = detect_communities(graph, cache, DetectionParams())
        for community in before:
            graph.add_community_node(f"c{community.index}", community.members)
        after = detect_communities(graph, cache, DetectionParams())
        assert [c.members for c in after] == [c.members for c in before]

    def test_same_seed_same_result(self, medical_graph, embedding):
        first = detect_communities(medical_graph, EmbeddingCache(embedding), DetectionParams(seed=3))
        second = detect_communities(medical_graph, EmbeddingCache(embedding), DetectionParams(seed=3))
        assert first == second

    def test_empty_graph(self, embedding):
        assert detect_communities(Graph(), EmbeddingCache(embedding), DetectionParams()) == []

    def test_single_entity(self, embedding):
        graph = Graph()
        graph.upsert_entity("Solo", "Thing")
        (community,) = detect_communities(graph, EmbeddingCache(embedding), DetectionParams())
        assert community.members == ["1"]
        assert community.center == "1"

    def test_init_drops_to_distinct_points(self):
        reps = {"1": np.ones(3), "2": np.ones(3), "3": np.ones(3)}
        assert init_clusters(reps, DetectionParams(granularity=1)).groups() == [["1", "2", "3"]]
