import itertools
import random

import pytest

from semalg.errors import GraphParseError, SemalgError
from semalg.graphs import (
    ColliderType,
    MixedGraph,
    canonical_code,
    collider_type,
    count_acyclic,
    count_dags,
    delete_edges,
    enumerate_acyclic,
    enumerate_acyclic_digits,
    format_graph_text,
    graph_from_code,
    graph_from_digits,
    graph_from_json_dict,
    graph_to_json_dict,
    is_acyclic,
    parse_graph_text,
    skeleton,
    structure_predicates,
)


def test_skeleton_fig1(fig1):
    assert skeleton(fig1) == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)}


def test_skeleton_trivial():
    assert skeleton(MixedGraph.from_edges(4)) == frozenset()
    bow = MixedGraph.from_edges(2, directed=[(0, 1)], bidirected=[(0, 1)])
    assert skeleton(bow) == {(0, 1)}


def test_collider_classification(instrumental):
    dag = MixedGraph.from_edges(3, directed=[(0, 1), (2, 1)])
    assert collider_type(dag, 0, 1, 2) is ColliderType.FULL
    assert collider_type(instrumental, 0, 1, 2) is ColliderType.PARTIAL
    chain = MixedGraph.from_edges(3, directed=[(0, 1), (1, 2)])
    assert collider_type(chain, 0, 1, 2) is ColliderType.NOT_COLLIDER


def test_collider_symmetry():
    rng = random.Random(0)
    graphs = [g for g in enumerate_acyclic(3)]
    for g in rng.sample(graphs, 60):
        sk = skeleton(g)
        for v2 in range(3):
            others = [v for v in range(3) if v != v2]
            v1, v3 = others
            if (min(v1, v2), max(v1, v2)) in sk and (min(v2, v3), max(v2, v3)) in sk:
                assert collider_type(g, v1, v2, v3) == collider_type(g, v3, v2, v1)


def test_collider_rejects_bad_triples():
    g = MixedGraph.from_edges(3, directed=[(0, 1)])
    with pytest.raises(SemalgError):
        collider_type(g, 0, 1, 2)  # pair (1,2) not adjacent
    with pytest.raises(SemalgError):
        collider_type(g, 0, 0, 1)


@pytest.mark.parametrize("n,count", [(1, 1), (2, 6), (3, 200), (4, 34752)])
def test_enumeration_counts(n, count):
    assert count_acyclic(n) == count
    assert sum(1 for _ in enumerate_acyclic_digits(n)) == count


def test_enumeration_count_formula():
    for n in range(1, 5):
        assert count_acyclic(n) == count_dags(n) * 2 ** (n * (n - 1) // 2)


def test_enumeration_sorted_unique_acyclic():
    codes = []
    for g in enumerate_acyclic(3):
        assert is_acyclic(g)
        codes.append(g.code())
    assert codes == sorted(codes)
    assert len(set(codes)) == len(codes)


def test_enumeration_bounds():
    with pytest.raises(SemalgError):
        list(enumerate_acyclic_digits(0))
    with pytest.raises(SemalgError):
        list(enumerate_acyclic_digits(7))


def test_canonical_code_relabel_invariance():
    rng = random.Random(1)
    graphs = list(enumerate_acyclic(4))
    for _ in range(200):
        g = rng.choice(graphs)
        perm = list(range(4))
        rng.shuffle(perm)
        assert canonical_code(g) == canonical_code(g.relabel(perm))


def test_canonical_code_separates_chain_and_collider():
    chain = MixedGraph.from_edges(3, directed=[(0, 1), (1, 2)])
    collider = MixedGraph.from_edges(3, directed=[(0, 1), (2, 1)])
    assert canonical_code(chain) != canonical_code(collider)


def test_canonical_code_bow_swap():
    a = MixedGraph.from_edges(
        4, directed=[("a", "b"), ("c", "a"), ("d", "a")], bidirected=[("a", "b")]
    )
    b = MixedGraph.from_edges(
        4, directed=[("b", "a"), ("c", "b"), ("d", "b")], bidirected=[("a", "b")]
    )
    assert canonical_code(a) == canonical_code(b)


def test_canonical_code_counts_isomorphism_classes_n3():
    graphs = list(enumerate_acyclic(3))
    canon = {canonical_code(g) for g in graphs}

    def isomorphic(g, h):
        return any(
            g.relabel(p).code() == h.code() for p in itertools.permutations(range(3))
        )

    reps = []
    for g in graphs:
        if not any(isomorphic(g, r) for r in reps):
            reps.append(g)
    assert len(canon) == len(reps)


def test_delete_edges(union3, instrumental):
    got = delete_edges(union3, [("->", 0, 2)])
    assert got.directed == instrumental.directed
    assert got.bidirected == instrumental.bidirected
    assert delete_edges(union3, []).code() == union3.code()
    bow = MixedGraph.from_edges(2, directed=[(0, 1)], bidirected=[(0, 1)])
    only_directed = delete_edges(bow, [("<->", 0, 1)])
    assert only_directed.directed == {(0, 1)} and not only_directed.bidirected
    with pytest.raises(SemalgError):
        delete_edges(bow, [("->", 1, 0)])


def test_delete_shrinks_skeleton():
    rng = random.Random(3)
    graphs = list(enumerate_acyclic(4))
    for _ in range(50):
        g = rng.choice(graphs)
        edges = [("->", u, v) for (u, v) in g.directed] + [
            ("<->", u, v) for (u, v) in g.bidirected
        ]
        if not edges:
            continue
        sub = rng.sample(edges, rng.randint(1, len(edges)))
        assert skeleton(delete_edges(g, sub)) <= skeleton(g)


def test_structure_predicates(star_bows):
    flags = structure_predicates(star_bows)
    assert flags.has_bow and flags.is_acyclic and not flags.is_dag
    empty = structure_predicates(MixedGraph.from_edges(3))
    assert empty.is_dag and empty.is_bow_free
    cyc = structure_predicates(MixedGraph.from_edges(2, directed=[(0, 1), (1, 0)]))
    assert not cyc.is_acyclic and not cyc.is_dag


def test_code_roundtrip():
    for g in enumerate_acyclic(3):
        assert graph_from_code(3, g.code()).code() == g.code()


def test_decode_rejects_illegal_state():
    with pytest.raises(SemalgError):
        graph_from_digits(2, bytes([7]))


def test_parse_text_roundtrip(fig1):
    text = format_graph_text(fig1)
    again = parse_graph_text(text)
    assert again.directed == fig1.directed and again.bidirected == fig1.bidirected


def test_parse_text_errors():
    with pytest.raises(GraphParseError) as err:
        parse_graph_text("nodes: a b\na -> a\n")
    assert err.value.line == 2
    with pytest.raises(GraphParseError) as err:
        parse_graph_text("nodes: a b\na -> b\na -> b\n")
    assert err.value.line == 3
    with pytest.raises(GraphParseError):
        parse_graph_text("a -> b\n")
    with pytest.raises(GraphParseError):
        parse_graph_text("nodes: a b\na => b\n")


def test_json_roundtrip(fig1):
    data = graph_to_json_dict(fig1)
    again = graph_from_json_dict(data)
    assert again.directed == fig1.directed and again.bidirected == fig1.bidirected
    with pytest.raises(GraphParseError):
        graph_from_json_dict({"nodes": ["a", "b"], "directed": [["a", "a"]]})
    with pytest.raises(GraphParseError):
        graph_from_json_dict(
            {"nodes": ["a", "b"], "directed": [["a", "b"], ["a", "b"]]}
        )
