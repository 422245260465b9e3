"""Forward closures, attractors, and shortest paths."""

from __future__ import annotations

import pytest

from linvex import diagram
from linvex.errors import ClosureBudgetExceeded, Unreachable
from linvex.genperm import validate

from conftest import STUCK_FREE_NONCLASSICAL, perm_pool


def test_classical_two_band_closure():
    p = validate(["A", "B"], ["B", "A"])
    g = diagram.forward_closure(p)
    assert g.node_count == 1
    assert len(g.edges[p]) == 2
    assert all(edge.target == p for edge in g.edges[p])


def test_classical_three_band_closure():
    # the class of the order-reversing three-band permutation
    p = validate(["A", "B", "C"], ["C", "B", "A"])
    g = diagram.forward_closure(p)
    assert g.node_count == 3
    expected = {
        (("A", "B", "C"), ("C", "B", "A")),
        (("A", "C", "B"), ("C", "B", "A")),
        (("A", "B", "C"), ("C", "A", "B")),
    }
    assert {(n.top, n.bottom) for n in g.nodes} == expected


def test_closure_deterministic():
    p = validate(["A", "A", "B"], ["B", "C", "C"])
    g1 = diagram.forward_closure(p)
    g2 = diagram.forward_closure(p)
    assert g1.nodes == g2.nodes
    assert all(g1.edges[n] == g2.edges[n] for n in g1.nodes)
    assert g1.node_count == 12


def test_budget_zero():
    stuck = validate(["A", "B", "A"], ["C", "B", "C"])  # no feasible edges
    g = diagram.forward_closure(stuck, budget=0)
    assert g.node_count == 1
    with pytest.raises(ClosureBudgetExceeded):
        diagram.forward_closure(validate(["A", "B"], ["B", "A"]), budget=0)


def test_edge_witness_reproduces_edge():
    from linvex import rauzy
    from linvex.exchange import Exchange

    p = validate(["A", "A", "B"], ["B", "C", "C"])
    g = diagram.forward_closure(p)
    for node in g.nodes:
        for edge in g.edges[node]:
            induced, step = rauzy.split(Exchange(node, edge.witness_widths()))
            assert induced.perm == edge.target
            assert (step.winner, step.loser) == (edge.winner, edge.loser)


def test_edge_target_independent_of_witness():
    # the induced combinatorics depend only on the direction
    from linvex import rauzy
    from linvex.exchange import Exchange
    from fractions import Fraction as F

    p = validate(["A", "A", "B"], ["B", "C", "C"])
    g = diagram.forward_closure(p)
    for edge in g.edges[p]:
        w = edge.witness_widths()
        scaled = {k: v * 3 for k, v in w.items()}
        bumped = dict(scaled)
        bumped[edge.winner] += F(1, 97)
        if p.orientation_of(edge.winner).value != "preserving":
            pool = (
                p.reversing_bottom_bands()
                if edge.winner in p.reversing_top_bands()
                else p.reversing_top_bands()
            )
            partner = [b for b in pool if b != edge.loser][0]
            bumped[partner] += F(1, 97)
        induced, _ = rauzy.split(Exchange(p, bumped))
        assert induced.perm == edge.target


def _toy_graph(nodes, arrows):
    perms = {name: validate([f"{name}", "Z"], ["Z", f"{name}"]) for name in nodes}
    edges = {}
    for name in nodes:
        outs = []
        for target in arrows.get(name, ()):  # direction tags unused here
            outs.append(
                diagram.Edge(
                    source=perms[name],
                    kind=list(__import__("linvex.rauzy", fromlist=["SplitKind"]).SplitKind)[0],
                    winner="Z",
                    loser="Z",
                    target=perms[target],
                    witness=(),
                )
            )
        edges[perms[name]] = tuple(outs)
    return perms, diagram.RauzyGraph(
        root=perms[nodes[0]], nodes=[perms[n] for n in nodes], edges=edges
    )


def test_attractors_single_node_self_loop():
    perms, g = _toy_graph(["a"], {"a": ["a"]})
    assert diagram.attractors(g) == [frozenset({perms["a"]})]


def test_attractors_linear_chain():
    perms, g = _toy_graph(["a", "b", "c"], {"a": ["b"], "b": ["c"]})
    assert diagram.attractors(g) == [frozenset({perms["c"]})]


def test_attractors_two_cycles_one_exit():
    perms, g = _toy_graph(
        ["a", "b", "c", "d"],
        {"a": ["b"], "b": ["a", "c"], "c": ["d"], "d": ["c"]},
    )
    comps = diagram.attractors(g)
    assert comps == [frozenset({perms["c"], perms["d"]})]


def test_scc_matches_pairwise_reachability():
    p = validate(["A", "A", "B"], ["B", "C", "C"])
    g = diagram.forward_closure(p)
    comps = diagram.strongly_connected_components(g)
    assert sum(len(c) for c in comps) == g.node_count
    for comp in comps:
        for a in comp:
            reach = diagram.reachable_from(g, a)
            assert comp <= reach


def test_shortest_path_trivial_and_unreachable():
    p = validate(["A", "B"], ["B", "A"])
    g = diagram.forward_closure(p)
    assert diagram.shortest_path(g, p, lambda n: True) == []
    with pytest.raises(Unreachable):
        diagram.shortest_path(g, p, lambda n: False)


def test_shortest_path_matches_exhaustive_search():
    p = validate(["A", "A", "B"], ["B", "C", "C"])
    g = diagram.forward_closure(p)

    def bfs_len(start, predicate):
        from collections import deque

        seen = {start}
        queue = deque([(start, 0)])
        while queue:
            node, dist = queue.popleft()
            if predicate(node):
                return dist
            for edge in g.edges[node]:
                if edge.target not in seen:
                    seen.add(edge.target)
                    queue.append((edge.target, dist + 1))
        return None

    for target_band in ("A", "B", "C"):
        predicate = lambda n: n.top[-1] == target_band  # noqa: E731
        expected = bfs_len(p, predicate)
        if expected is None:
            with pytest.raises(Unreachable):
                diagram.shortest_path(g, p, predicate)
        else:
            path = diagram.shortest_path(g, p, predicate)
            assert len(path) == expected
            node = p
            for edge in path:
                assert edge.source == node
                node = edge.target
            assert predicate(node)


def test_curated_pool_closures_are_stuck_free():
    for perm in perm_pool(STUCK_FREE_NONCLASSICAL):
        g = diagram.forward_closure(perm, budget=4000)
        assert not g.stuck_nodes(), perm


def test_out_degree_bounded_by_two():
    p = validate(["A", "A", "B"], ["B", "C", "D", "C", "D"])
    g = diagram.forward_closure(p, budget=2000)
    assert all(len(g.edges[n]) <= 2 for n in g.nodes)
