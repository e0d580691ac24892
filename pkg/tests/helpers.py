"""Shared test scaffolding: tiny deterministic worlds and independent oracles."""

from __future__ import annotations

import math
import random

from evacsim.geo import Point, Shelter, Waterway, World


def line_world(
    n_nodes: int = 4,
    spacing: float = 100.0,
    shelter_specs: list[tuple[int, int, int, bool]] | None = None,
    building_offsets: list[tuple[float, float]] | None = None,
    rescuer_starts: list[int] | None = None,
    river_y: float = -1000.0,
) -> World:
    """A straight road with buildings hung off it. Everything deterministic."""
    nodes = {i: Point(i * spacing, 0.0) for i in range(n_nodes)}
    edges = [(i, i + 1, spacing) for i in range(n_nodes - 1)]
    if building_offsets is None:
        building_offsets = [(i * spacing, 20.0) for i in range(n_nodes)]
    buildings = {i: Point(x, y) for i, (x, y) in enumerate(building_offsets)}
    if shelter_specs is None:
        shelter_specs = [(0, n_nodes - 1, 1000, False)]
    shelters = [Shelter(id=s, node=n, capacity=c, external=e) for s, n, c, e in shelter_specs]
    if rescuer_starts is None:
        rescuer_starts = [0]
    waterways = [Waterway(0, (Point(-50.0, river_y), Point(n_nodes * spacing + 50.0, river_y)))]
    return World(
        nodes=nodes,
        edges=edges,
        buildings=buildings,
        waterways=waterways,
        shelters=shelters,
        rescuer_starts=rescuer_starts,
    )


def random_graph_world(seed: int, n_nodes: int = 50, extra_edges: int = 30) -> World:
    """Connected random geometric-ish graph: spanning chain plus chords."""
    rng = random.Random(seed)
    nodes = {i: Point(rng.uniform(0, 1000), rng.uniform(0, 1000)) for i in range(n_nodes)}
    seen = set()
    edges = []

    def add(a: int, b: int) -> None:
        if a == b:
            return
        key = (min(a, b), max(a, b))
        if key in seen:
            return
        seen.add(key)
        edges.append((a, b, nodes[a].distance_to(nodes[b])))

    order = list(range(n_nodes))
    rng.shuffle(order)
    for i in range(1, n_nodes):
        add(order[i], order[rng.randrange(i)])
    for _ in range(extra_edges):
        add(rng.randrange(n_nodes), rng.randrange(n_nodes))
    return World(
        nodes=nodes,
        edges=edges,
        buildings={},
        waterways=[],
        shelters=[],
        rescuer_starts=[],
    )


def bellman_ford_distance(world: World, src: int, dst: int) -> float:
    """Independent relaxation-based shortest-path oracle (lengths only)."""
    dist = {n: math.inf for n in world.nodes}
    dist[src] = 0.0
    for _ in range(len(world.nodes) - 1):
        changed = False
        for a, b, length in world.edges:
            if dist[a] + length < dist[b]:
                dist[b] = dist[a] + length
                changed = True
            if dist[b] + length < dist[a]:
                dist[a] = dist[b] + length
                changed = True
        if not changed:
            break
    return dist[dst]
