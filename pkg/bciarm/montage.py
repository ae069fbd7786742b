"""Electrode montage kept as an RDF graph.

Every electrode is a node carrying its name, its position in the montage order
and its coordinates on the flat 10-20 layout. The Laplacian filter needs, for
each electrode, the set of surrounding electrodes; those come from the layout
coordinates rather than from a hand-written table.

"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TypeAlias, TypeVar

import rdflib
from rdflib.namespace import RDF
from typing_extensions import Self

T = TypeVar("T")
Position: TypeAlias = tuple[float, float]
UndirectedGraph: TypeAlias = dict[T, frozenset[T]]

EEG = rdflib.Namespace("urn:bciarm:montage#")


class UnknownChannel(ValueError):
    pass


@dataclass
class Montage:
    rdf: rdflib.Graph

    @classmethod
    def from_object(cls, obj) -> Self:
        """Build the graph from a `{"electrodes": [{"name", "x", "y"}, ...]}`
        object. The list order is the montage order."""

        if not isinstance(obj, dict) or not isinstance(obj.get("electrodes"), list):
            raise ValueError("Input doesn't seem to be a valid montage")

        g = rdflib.Graph()
        g.bind("eeg", EEG)
        seen = set()
        for index, electrode in enumerate(obj["electrodes"]):
            name = electrode["name"]
            if name in seen:
                raise ValueError(f"electrode {name} appears twice")
            seen.add(name)

            node = EEG[name]
            g.add((node, RDF.type, EEG.Electrode))
            g.add((node, EEG.name, rdflib.Literal(name)))
            g.add((node, EEG["index"], rdflib.Literal(index)))
            g.add((node, EEG.x, rdflib.Literal(float(electrode["x"]))))
            g.add((node, EEG.y, rdflib.Literal(float(electrode["y"]))))

        return cls(g)

    @classmethod
    def from_json(cls, path: Path) -> Self:
        with open(path, "rb") as f:
            obj = json.load(f)

        return cls.from_object(obj)

    @classmethod
    def standard(cls) -> Self:
        """The packaged 19-channel 10-20 montage."""
        import bciarm.data.montage as montage_data

        return cls.from_json(montage_data.standard_1020)

    def channels(self) -> list[str]:
        """Electrode names in montage order."""

        q = """# -*- mode: sparql -*-
    SELECT ?name
    WHERE {
      ?e a eeg:Electrode .
      ?e eeg:name ?name .
      ?e eeg:index ?index .
    }
    ORDER BY ?index"""
        return [r.name.toPython() for r in self.rdf.query(q)]

    def positions(self) -> dict[str, Position]:
        q = """# -*- mode: sparql -*-
    SELECT ?name ?x ?y
    WHERE {
      ?e a eeg:Electrode .
      ?e eeg:name ?name .
      ?e eeg:x ?x .
      ?e eeg:y ?y .
    }"""
        return {
            r.name.toPython(): (r.x.toPython(), r.y.toPython())
            for r in self.rdf.query(q)
        }

    def position(self, channel: str) -> Position:
        q = """# -*- mode: sparql -*-
    SELECT ?x ?y
    WHERE {
      ?e eeg:name ?name .
      ?e eeg:x ?x .
      ?e eeg:y ?y .
    }"""
        for r in self.rdf.query(q, initBindings={"name": rdflib.Literal(channel)}):
            return (r.x.toPython(), r.y.toPython())
        raise UnknownChannel(f"unknown channel {channel!r}")

    def neighbors(self, channel: str, k: int = 4) -> list[str]:
        """The `k` electrodes closest to `channel` on the layout, nearest
        first. Equal distances keep montage order."""

        center = self.position(channel)
        order = self.channels()
        positions = self.positions()
        others = [name for name in order if name != channel]
        others.sort(
            key=lambda name: (
                round(math.dist(center, positions[name]), 9),
                order.index(name),
            )
        )
        return others[:k]

    def adjacency(self, k: int = 4) -> UndirectedGraph[str]:
        """Symmetric closure of the k-nearest-neighbor relation."""

        out: dict[str, set[str]] = {name: set() for name in self.channels()}
        for a in out:
            for b in self.neighbors(a, k):
                out[a].add(b)
                out[b].add(a)
        return {a: frozenset(b) for a, b in out.items()}


def undirected_graph_to_dot(g: UndirectedGraph[str]) -> str:
    o = ""
    o += "graph G {\n"

    for a, neighbors in g.items():
        o += f'"{a}";\n'

        for b in sorted(neighbors):
            if a < b:
                o += f'"{a}" -- "{b}";\n'
    o += "}\n"
    return o
