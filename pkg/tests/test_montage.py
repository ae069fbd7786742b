import pytest

import bciarm.signals as signals
from bciarm.montage import Montage, UnknownChannel, undirected_graph_to_dot


def test_channels():
    assert Montage.standard().channels() == list(signals.MONTAGE)


def test_position():
    montage = Montage.standard()
    assert montage.position("C3") == (-1.0, 0.0)
    assert montage.positions()["Pz"] == (0.0, -1.0)
    with pytest.raises(UnknownChannel):
        montage.position("Oz")


def test_neighbors():
    montage = Montage.standard()
    assert montage.neighbors("C3") == ["F3", "P3", "T3", "Cz"]
    assert montage.neighbors("Cz") == ["C3", "C4", "Fz", "Pz"]
    assert montage.neighbors("C4", 2) == ["F4", "P4"]


def test_adjacency_is_symmetric():
    g = Montage.standard().adjacency()
    assert set(g) == set(signals.MONTAGE)
    for a, neighbors in g.items():
        assert a not in neighbors
        for b in neighbors:
            assert a in g[b]


def test_bad_montages():
    with pytest.raises(ValueError):
        Montage.from_object([])
    with pytest.raises(ValueError):
        Montage.from_object(
            {"electrodes": [{"name": "C3", "x": 0, "y": 0}, {"name": "C3", "x": 1, "y": 0}]}
        )


def test_dot():
    dot = undirected_graph_to_dot({"C3": frozenset({"Cz"}), "Cz": frozenset({"C3"})})
    assert dot == 'graph G {\n"C3";\n"C3" -- "Cz";\n"Cz";\n}\n'
