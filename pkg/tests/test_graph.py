import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffsim.graph import (
    Graph, GraphError, GraphParseError, embed_star, load_edge_list, make_clique,
    make_random_regular, make_star, parse_graph_spec, save_edge_list,
)


def _check_invariants(g: Graph):
    degs = g.degrees
    assert degs.sum() == 2 * g.edge_count
    for u, v in g.edges:
        assert u < v < g.vertex_count
        assert v in g.neighbors(u) and u in g.neighbors(v)
    assert len(set(g.edges)) == g.edge_count
    assert list(g.edges) == sorted(g.edges)


# --- stars ---------------------------------------------------------------

def test_star_five_leaves():
    g = make_star(5)
    assert (g.vertex_count, g.edge_count, g.degree(0)) == (6, 5, 5)
    assert all(g.degree(v) == 1 for v in range(1, 6))
    assert g.labels[0] == "center"
    assert g.is_star
    _check_invariants(g)


def test_star_single_leaf():
    g = make_star(1)
    assert (g.vertex_count, g.edge_count) == (2, 1)


def test_star_needs_a_leaf():
    with pytest.raises(GraphError):
        make_star(0)


# --- random regular --------------------------------------------------------

def test_regular_4_3_is_k4():
    for seed in (0, 1, 99):
        assert make_random_regular(4, 3, seed).edges == make_clique(4).edges


def test_regular_odd_degree_sum():
    with pytest.raises(GraphError):
        make_random_regular(5, 3, 0)


def test_regular_degree_too_large():
    with pytest.raises(GraphError):
        make_random_regular(4, 4, 0)


def test_regular_100_4():
    g = make_random_regular(100, 4, 7)
    assert g.edge_count == 200
    assert (g.degrees == 4).all()
    _check_invariants(g)


def test_regular_is_deterministic_per_seed():
    assert make_random_regular(60, 6, 3).edges == make_random_regular(60, 6, 3).edges
    assert make_random_regular(60, 6, 3).edges != make_random_regular(60, 6, 4).edges


@pytest.mark.parametrize("n,d", [(26, 23), (40, 21), (7, 6), (10, 9)])
def test_dense_regular_via_complement(n, d):
    g = make_random_regular(n, d, 1)
    assert (g.degrees == d).all()
    _check_invariants(g)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 40), d=st.integers(1, 39), seed=st.integers(0, 2**64 - 1))
def test_regular_degree_exact(n, d, seed):
    if d >= n or (n * d) % 2:
        with pytest.raises(GraphError):
            make_random_regular(n, d, seed)
        return
    g = make_random_regular(n, d, seed)
    assert (g.degrees == d).all()
    _check_invariants(g)


# --- embedding -------------------------------------------------------------

def test_embed_identity():
    s = make_star(3)
    assert embed_star(s, [], 0).edges == s.edges


def test_embed_one_host_vertex():
    g = embed_star(make_star(3), [(0, 4)], 1)
    assert (g.vertex_count, g.edge_count, g.degree(0)) == (5, 4, 4)
    assert g.labels[4] == "host"


def test_embed_triangle_on_leaves():
    g = embed_star(make_star(3), [(1, 2), (2, 3), (1, 3)], 0)
    assert (g.vertex_count, g.edge_count) == (4, 6)
    assert sorted(g.degrees.tolist()) == [3, 3, 3, 3]
    assert not g.is_star


@pytest.mark.parametrize("edges", [[(1, 1)], [(0, 1)], [(2, 1), (1, 2)], [(0, 9)]])
def test_embed_rejects_bad_edges(edges):
    with pytest.raises(GraphError):
        embed_star(make_star(3), edges, 1)


@settings(max_examples=50, deadline=None)
@given(leaves=st.integers(1, 12), extra=st.integers(0, 5), data=st.data())
def test_embed_preserves_star(leaves, extra, data):
    n = leaves + 1 + extra
    cand = [(u, v) for u in range(n) for v in range(u + 1, n) if not (u == 0 and v <= leaves)]
    host = data.draw(st.lists(st.sampled_from(cand), unique=True, max_size=15)) if cand else []
    g = embed_star(make_star(leaves), host, extra)
    for i in range(1, leaves + 1):
        assert g.has_edge(0, i)
    _check_invariants(g)


# --- edge lists ------------------------------------------------------------

def test_load_star2():
    assert load_edge_list("0 1\n0 2") == make_star(2)


def test_save_star2():
    assert save_edge_list(make_star(2)) == "0 1\n0 2\n"


def test_comments_and_blank_lines():
    g = load_edge_list("# header\n\n2 0\n  1 0  \n")
    assert g.edges == ((0, 1), (0, 2))


@pytest.mark.parametrize("text,line", [
    ("0 1\n0 0", 2),
    ("0 1\n1 0", 2),
    ("0 1\nx 2", 2),
    ("0 1 2", 1),
    ("# c\n0 -1", 2),
])
def test_parse_errors_carry_line_number(text, line):
    with pytest.raises(GraphParseError) as ei:
        load_edge_list(text)
    assert ei.value.lineno == line


def test_out_of_range_with_vertex_count():
    with pytest.raises(GraphParseError):
        load_edge_list("0 5", vertex_count=3)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 15), data=st.data())
def test_round_trip(n, data):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    g = Graph.from_edges(n, edges)
    back = load_edge_list(save_edge_list(g), vertex_count=n)
    assert back == g


def test_graph_rejects_noncanonical():
    with pytest.raises(GraphError):
        Graph(3, ((1, 0),))
    with pytest.raises(GraphError):
        Graph(3, ((0, 1), (0, 1)))


# --- spec strings ----------------------------------------------------------

def test_graph_specs(tmp_path):
    assert parse_graph_spec("star:4") == make_star(4)
    assert parse_graph_spec("clique:5").edge_count == 10
    assert parse_graph_spec("regular:20:4:9") == make_random_regular(20, 4, 9)
    assert parse_graph_spec("regular:20:4", seed=9) == make_random_regular(20, 4, 9)
    f = tmp_path / "g.txt"
    f.write_text("0 1\n1 2\n")
    assert parse_graph_spec(f"file:{f}").edges == ((0, 1), (1, 2))
    for bad in ("star:x", "ring:4", "regular:5:3", "star:0"):
        with pytest.raises(GraphError):
            parse_graph_spec(bad)


def test_csr_matches_edges():
    g = make_random_regular(30, 4, 1)
    for v in range(g.vertex_count):
        nb = set(g.neighbors(v).tolist())
        assert nb == {b if a == v else a for a, b in g.edges if v in (a, b)}
        for k in range(g.indptr[v], g.indptr[v + 1]):
            a, b = g.edge_array[g.adj_edge[k]]
            assert v in (a, b) and g.indices[k] in (a, b)
    assert isinstance(g.degrees, np.ndarray)
