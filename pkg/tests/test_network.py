import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_observer.exceptions import AssumptionViolation
from hybrid_observer.network import (
    Digraph,
    GraphSchedule,
    complete_graph,
    flocking_matrix,
    graph_at,
    is_strongly_connected,
    random_strongly_connected,
)


def test_self_arcs_required():
    with pytest.raises(ValueError):
        Digraph({1: [2], 2: [1, 2]})
    with pytest.raises(ValueError):
        Digraph({1: [1, 3], 2: [2]})


def test_example_graph_connectivity(example_graph):
    assert is_strongly_connected(example_graph)
    assert example_graph.arcs() >= {(1, 2), (2, 1), (3, 2), (2, 3)}


def test_self_arcs_only_not_connected():
    assert not is_strongly_connected(Digraph({1: [1], 2: [2], 3: [3]}))
    assert is_strongly_connected(Digraph({1: [1]}))


def test_one_way_chain_not_connected():
    # 1 -> 2 -> 3 with no way back
    assert not is_strongly_connected(Digraph({1: [1], 2: [1, 2], 3: [2, 3]}))
    assert is_strongly_connected(Digraph({1: [1, 3], 2: [1, 2], 3: [2, 3]}))


def test_flocking_example(example_graph):
    F = flocking_matrix(example_graph)
    expected = np.array([[1 / 2, 1 / 2, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 2, 1 / 2]])
    np.testing.assert_allclose(F, expected, atol=1e-15)


def test_flocking_trivial_and_complete():
    np.testing.assert_array_equal(flocking_matrix(Digraph({1: [1], 2: [2]})), np.eye(2))
    np.testing.assert_allclose(flocking_matrix(complete_graph(4)), np.full((4, 4), 0.25))


def test_flocking_returns_copy(example_graph):
    F = flocking_matrix(example_graph)
    F[0, 0] = 9.0
    assert flocking_matrix(example_graph)[0, 0] == 0.5


@settings(max_examples=50, deadline=None)
@given(m=st.integers(2, 8), density=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_random_graph_properties(m, density, seed):
    g = random_strongly_connected(m, density, seed)
    assert is_strongly_connected(g)
    F = flocking_matrix(g)
    np.testing.assert_allclose(F.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(F >= 0) and np.all(np.diag(F) > 0)
    assert g == random_strongly_connected(m, density, seed)


def test_random_graph_density_extremes():
    assert random_strongly_connected(5, 1.0, 3) == complete_graph(5)
    g = random_strongly_connected(5, 0.0, 3)
    # a bare cycle: self-arc plus exactly one neighbor each
    assert all(len(g.neighbors(i)) == 2 for i in g.vertices)


def test_piecewise_switch():
    g1 = complete_graph(3)
    g2 = Digraph({1: [1, 3], 2: [1, 2], 3: [2, 3]})
    sched = GraphSchedule.piecewise([0.0, 10.0], [g1, g2])
    assert sched.graph_at(9.99) == g1
    assert sched.graph_at(10.0) == g2
    assert graph_at(sched, 50.0) == g2


def test_dropout_restricts_graph():
    sched = GraphSchedule.static(complete_graph(4), dropouts=[(50.0, 2)])
    assert sched.graph_at(49.9).vertices == (1, 2, 3, 4)
    g = sched.graph_at(60.0)
    assert g.vertices == (1, 3, 4)
    assert all(2 not in g.neighbors(i) for i in g.vertices)
    assert sched.active_vertices(60.0) == (1, 3, 4)


def test_dropout_disconnects():
    # vertex 2 is the only bridge in the example graph
    g = Digraph({1: [1, 2], 2: [1, 2, 3], 3: [2, 3]})
    sched = GraphSchedule.static(g, dropouts=[(5.0, 2)])
    with pytest.raises(AssumptionViolation) as exc:
        sched.graph_at(6.0)
    assert exc.value.assumption == "strong_connectivity"
    warn = GraphSchedule.static(g, dropouts=[(5.0, 2)], policy="warn")
    with pytest.warns(RuntimeWarning):
        warn.graph_at(6.0)


def test_generator_schedule_deterministic():
    a = GraphSchedule.generator(5, density=0.3, seed=7, period=0.25)
    b = GraphSchedule.generator(5, density=0.3, seed=7, period=0.25)
    for t in np.arange(0, 5, 0.1):
        assert a.graph_at(t) == b.graph_at(t)
        assert is_strongly_connected(a.graph_at(t))
    # constant on each period
    assert a.graph_at(0.26) == a.graph_at(0.49)
    graphs = {a.graph_at(0.25 * k) for k in range(40)}
    assert len(graphs) > 1


def test_generator_with_dropout():
    sched = GraphSchedule.generator(4, density=0.5, seed=1, dropouts=[(3.0, 4)])
    assert sched.graph_at(2.5).m == 4
    assert sched.graph_at(3.0).vertices == (1, 2, 3)


@settings(max_examples=40, deadline=None)
@given(drops=st.lists(st.tuples(st.floats(0, 20), st.integers(1, 6)), max_size=4),
       t1=st.floats(0, 20), t2=st.floats(0, 20))
def test_dropout_monotone(drops, t1, t2):
    t1, t2 = sorted((t1, t2))
    sched = GraphSchedule.static(complete_graph(6), dropouts=drops)
    assert set(sched.active_vertices(t2)) <= set(sched.active_vertices(t1))


def test_schedule_validation():
    with pytest.raises(ValueError):
        GraphSchedule.piecewise([1.0], [complete_graph(2)])
    with pytest.raises(ValueError):
        GraphSchedule(mode="other", graphs=(complete_graph(2),))
    with pytest.raises(ValueError):
        GraphSchedule.static(complete_graph(2)).graph_at(-1.0)
