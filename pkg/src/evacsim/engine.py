"""Discrete-time evacuation simulation.

One run: rescuers roam the road network informing households, informed
households score their perceived risk and either stay or walk to the
nearest shelter with room, shelter managers admit or redirect arrivals.
Every run is a pure function of (world, profiles, config): all randomness
flows from config.seed through two named streams, one consumed in a fixed
order at initialization (epsilon draws, fallback channel and tick,
rescuer placement) and one by the rescuer random walk during ticks.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

from .errors import InputError, InternalError
from .geo import Point, Shelter, World, classify_proximity, hazard_distance
from .population import HouseholdProfile, validate_profiles
from .risk import (
    Decision,
    RiskBreakdown,
    Scenario,
    WarningSource,
    Weights,
    cdm_score,
    crf_score,
    decide,
    highest_possible_score,
)
from .seeds import derive_seed

__all__ = [
    "RunConfig",
    "RunResult",
    "SimulationState",
    "WorldIndex",
    "HouseholdState",
    "UNAWARE",
    "INFORMED",
    "EVACUATING",
    "SHELTERED",
    "STAYING",
    "init_run",
    "step",
    "run",
    "event_log_csv",
]

# Household status codes. Transitions: UNAWARE -> INFORMED -> {EVACUATING,
# STAYING}; EVACUATING -> SHELTERED. SHELTERED and STAYING are terminal.
UNAWARE = 0
INFORMED = 1
EVACUATING = 2
SHELTERED = 3
STAYING = 4

STATUS_NAMES = {
    UNAWARE: "unaware",
    INFORMED: "informed",
    EVACUATING: "evacuating",
    SHELTERED: "sheltered",
    STAYING: "staying",
}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    weights: Weights
    threshold: float
    seed: int
    nb_households: int = 570
    nb_rescuers: int = 15
    nb_sheltermanagers: int = 4
    household_radius: float = 50.0  # reserved; kept for parameter parity
    rescuer_radius: float = 50.0
    shelter_radius: float = 50.0
    household_speed: float = 1.4  # m/s, walking
    rescuer_speed: float = 3.0  # m/s
    tick_seconds: float = 10.0
    max_ticks: int = 5000
    fallback_tick_min: int = 1000
    fallback_tick_max: int = 3000
    fallback_friends_prob: float = 0.5  # remainder goes to the media channel
    epsilon_min: float = 0.0
    epsilon_max: float = 0.05

    def validate(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise InputError(f"threshold {self.threshold!r} outside [0, 1]")
        for name in ("household_radius", "rescuer_radius", "shelter_radius",
                     "household_speed", "rescuer_speed", "tick_seconds"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be > 0")
        if self.max_ticks < 1:
            raise InputError("max_ticks must be >= 1")
        if self.nb_rescuers < 0 or self.nb_households < 0 or self.nb_sheltermanagers < 0:
            raise InputError("agent counts must be >= 0")
        if not 0 <= self.fallback_tick_min <= self.fallback_tick_max:
            raise InputError("fallback tick window requires 0 <= min <= max")
        if not 0.0 <= self.fallback_friends_prob <= 1.0:
            raise InputError("fallback_friends_prob outside [0, 1]")
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 0.05:
            raise InputError("epsilon range must satisfy 0 <= min <= max <= 0.05")


@dataclass(frozen=True)
class Event:
    tick: int
    agent_kind: str
    agent_id: int
    event: str
    detail: str


@dataclass
class RunResult:
    evacuated: int
    ticks_elapsed: int
    truncated: bool
    time_series: list[int]  # cumulative evacuate decisions after each tick
    sheltered_by_shelter: dict[int, int]  # shelter id -> admitted households
    shelter_occupancy: dict[int, int]  # shelter id -> persons
    stayed: int
    events: list[Event] | None


class WorldIndex:
    """Per-(world, profiles, radius) precomputation shared across runs.

    Holds house positions, snapped road nodes, hazard proximity classes,
    per-edge lists of households a roaming rescuer could perceive, and one
    shortest-path tree per shelter for routing and nearest-shelter queries.
    """

    def __init__(self, world: World, profiles: list[HouseholdProfile], rescuer_radius: float):
        self.world = world
        self.rescuer_radius = rescuer_radius
        self.n = len(profiles)
        self.house_pos: list[tuple[float, float]] = []
        self.house_node: list[int] = []
        self.proximity = []
        nodes = world.nodes
        node_items = sorted(nodes.items())
        for p in profiles:
            pos = world.buildings[p.building_id]
            self.house_pos.append((pos.x, pos.y))
            best_id, best_d = -1, math.inf
            for nid, np_ in node_items:
                d = (np_.x - pos.x) ** 2 + (np_.y - pos.y) ** 2
                if d < best_d:
                    best_d = d
                    best_id = nid
            self.house_node.append(best_id)
            self.proximity.append(classify_proximity(hazard_distance(world, pos)))

        # Edge -> households whose house is within rescuer_radius of the
        # segment (superset of anything perceivable from a point on it).
        self.edge_candidates: dict[tuple[int, int], tuple[int, ...]] = {}
        for a, b, _ in world.edges:
            pa, pb = nodes[a], nodes[b]
            cand = []
            for idx in range(self.n):
                hx, hy = self.house_pos[idx]
                if _point_segment_dist(hx, hy, pa.x, pa.y, pb.x, pb.y) <= rescuer_radius:
                    cand.append(idx)
            self.edge_candidates[(min(a, b), max(a, b))] = tuple(cand)

        # One shortest-path tree per shelter: dist and next-hop-toward-shelter
        # for every road node. Undirected graph, so dist(node, shelter) is
        # read straight off the tree.
        self.shelter_dist: dict[int, dict[int, float]] = {}
        self.shelter_next: dict[int, dict[int, int]] = {}
        for s in world.shelters:
            dist, parent = _dijkstra_tree(world, s.node)
            self.shelter_dist[s.id] = dist
            self.shelter_next[s.id] = parent
        self.shelters_by_id: dict[int, Shelter] = {s.id: s for s in world.shelters}
        self.internal_ids = sorted(s.id for s in world.shelters if not s.external)
        self.external_ids = sorted(s.id for s in world.shelters if s.external)

    def route_to_shelter(self, node: int, shelter_id: int) -> list[int]:
        nxt = self.shelter_next[shelter_id]
        route = [node]
        cur = node
        target = self.shelters_by_id[shelter_id].node
        while cur != target:
            cur = nxt[cur]
            route.append(cur)
        return route


def _dijkstra_tree(world: World, root: int) -> tuple[dict[int, float], dict[int, int]]:
    """Distances and next-hop-toward-root for every node reachable from root.

    Deterministic: the heap breaks distance ties by (node id, hop id).
    """
    dist: dict[int, float] = {root: 0.0}
    parent: dict[int, int] = {root: root}
    heap: list[tuple[float, int, int]] = [(0.0, root, root)]
    settled: set[int] = set()
    adjacency = world.adjacency
    while heap:
        d, node, via = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        parent[node] = via
        dist[node] = d
        for nbr, length in adjacency[node]:
            if nbr not in settled:
                nd = d + length
                if nd < dist.get(nbr, math.inf):
                    dist[nbr] = nd
                    heapq.heappush(heap, (nd, nbr, node))
                elif nd == dist.get(nbr, math.inf):
                    heapq.heappush(heap, (nd, nbr, node))
    return dist, parent


def _point_segment_dist(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    seg2 = vx * vx + vy * vy
    if seg2 == 0.0:
        return math.hypot(wx, wy)
    t = (wx * vx + wy * vy) / seg2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(wx - t * vx, wy - t * vy)


class HouseholdState:
    __slots__ = (
        "idx", "profile", "status", "epsilon", "fallback_source", "fallback_tick",
        "source", "breakdown", "decision", "target_shelter", "route", "leg",
        "progress", "x", "y", "tried_shelters", "stranded",
    )

    def __init__(self, idx: int, profile: HouseholdProfile, x: float, y: float):
        self.idx = idx
        self.profile = profile
        self.status = UNAWARE
        self.epsilon = 0.0
        self.fallback_source = WarningSource.MEDIA
        self.fallback_tick = 0
        self.source: WarningSource | None = None
        self.breakdown: RiskBreakdown | None = None
        self.decision: Decision | None = None
        self.target_shelter: int | None = None
        self.route: list[int] = []
        self.leg = 0
        self.progress = 0.0
        self.x = x
        self.y = y
        self.tried_shelters: set[int] = set()
        self.stranded = False


class RescuerState:
    __slots__ = ("idx", "node", "prev", "edge_a", "edge_b", "edge_len", "progress", "x", "y")

    def __init__(self, idx: int, node: int, pos: Point):
        self.idx = idx
        self.node = node  # node the rescuer last departed from (or stands on)
        self.prev = -1
        self.edge_a = -1  # current edge endpoints; -1 while standing on a node
        self.edge_b = -1
        self.edge_len = 0.0
        self.progress = 0.0
        self.x = pos.x
        self.y = pos.y


@dataclass
class SimulationState:
    world: World
    profiles: list[HouseholdProfile]
    cfg: RunConfig
    index: WorldIndex
    households: list[HouseholdState]
    rescuers: list[RescuerState]
    occupancy: dict[int, int]  # shelter id -> persons
    admitted: dict[int, int]  # shelter id -> households
    fallback_schedule: dict[int, list[int]]
    walk_rng: random.Random
    tick: int = 0
    informed_count: int = 0
    terminal_count: int = 0
    evacuate_decisions: int = 0
    stay_decisions: int = 0
    time_series: list[int] = field(default_factory=list)
    events: list[Event] | None = None
    cdm_cache: list[float] = field(default_factory=list)
    moving: list[HouseholdState] = field(default_factory=list)


def init_run(
    world: World,
    profiles: list[HouseholdProfile],
    cfg: RunConfig,
    index: WorldIndex | None = None,
    collect_events: bool = True,
) -> SimulationState:
    """Build the tick-0 state. Identical inputs give bit-identical states."""
    cfg.validate()
    validate_profiles(profiles, world)
    if cfg.nb_households != len(profiles):
        raise InputError(
            f"config expects {cfg.nb_households} households, population has {len(profiles)}"
        )
    n_internal = len(world.internal_shelters())
    if cfg.nb_sheltermanagers != n_internal:
        raise InputError(
            f"config expects {cfg.nb_sheltermanagers} shelter managers, "
            f"world has {n_internal} internal shelters"
        )
    if cfg.nb_rescuers > 0 and not world.rescuer_starts:
        raise InputError("config requests rescuers but the world has no rescuer_start nodes")

    if (index is None or index.world is not world
            or index.rescuer_radius != cfg.rescuer_radius or index.n != len(profiles)):
        index = WorldIndex(world, profiles, cfg.rescuer_radius)

    rng_init = random.Random(derive_seed(cfg.seed, "init"))
    households: list[HouseholdState] = []
    fallback_schedule: dict[int, list[int]] = {}
    for i, p in enumerate(profiles):
        hx, hy = index.house_pos[i]
        h = HouseholdState(i, p, hx, hy)
        h.epsilon = rng_init.uniform(cfg.epsilon_min, cfg.epsilon_max)
        h.fallback_source = (
            WarningSource.FRIENDS
            if rng_init.random() < cfg.fallback_friends_prob
            else WarningSource.MEDIA
        )
        h.fallback_tick = rng_init.randint(cfg.fallback_tick_min, cfg.fallback_tick_max)
        fallback_schedule.setdefault(h.fallback_tick, []).append(i)
        households.append(h)

    rescuers: list[RescuerState] = []
    starts = world.rescuer_starts
    events: list[Event] | None = [] if collect_events else None
    for i in range(cfg.nb_rescuers):
        node = starts[rng_init.randrange(len(starts))]
        rescuers.append(RescuerState(i, node, world.nodes[node]))
        if events is not None:
            events.append(Event(0, "rescuer", i, "placed", f"node={node}"))

    state = SimulationState(
        world=world,
        profiles=profiles,
        cfg=cfg,
        index=index,
        households=households,
        rescuers=rescuers,
        occupancy={s.id: 0 for s in world.shelters},
        admitted={s.id: 0 for s in world.shelters},
        fallback_schedule=fallback_schedule,
        walk_rng=random.Random(derive_seed(cfg.seed, "walk")),
        events=events,
        cdm_cache=[cdm_score(p) for p in profiles],
    )
    return state


def _would_fit(state: SimulationState, shelter: Shelter, members: int) -> bool:
    if shelter.external:
        return True
    return state.occupancy[shelter.id] + members <= shelter.capacity


def _pick_shelter(state: SimulationState, node: int, members: int, exclude: set[int]) -> int | None:
    """Nearest internal shelter that would fit, else nearest external.

    Ties break by shelter id; unreachable shelters are skipped.
    """
    index = state.index
    best: tuple[float, int] | None = None
    for sid in index.internal_ids:
        if sid in exclude:
            continue
        shelter = index.shelters_by_id[sid]
        if not _would_fit(state, shelter, members):
            continue
        d = index.shelter_dist[sid].get(node)
        if d is None:
            continue
        if best is None or (d, sid) < best:
            best = (d, sid)
    if best is None:
        for sid in index.external_ids:
            d = index.shelter_dist[sid].get(node)
            if d is None:
                continue
            if best is None or (d, sid) < best:
                best = (d, sid)
    return None if best is None else best[1]


def _start_evacuation(state: SimulationState, h: HouseholdState, t: int) -> None:
    node = state.index.house_node[h.idx]
    target = _pick_shelter(state, node, h.profile.members, exclude=set())
    if target is None:
        h.stranded = True
        h.route = [node]
        h.leg = 0
        h.progress = 0.0
        if state.events is not None:
            state.events.append(Event(t, "household", h.idx, "stranded", "no reachable shelter"))
        return
    h.target_shelter = target
    h.route = state.index.route_to_shelter(node, target)
    h.leg = 0
    h.progress = 0.0
    p = state.world.nodes[node]
    h.x, h.y = p.x, p.y  # movement happens on the road network
    if state.events is not None:
        state.events.append(Event(t, "household", h.idx, "depart", f"shelter={target}"))


def _inform(state: SimulationState, h: HouseholdState, source: WarningSource, t: int,
            newly: list[int]) -> None:
    h.status = INFORMED
    h.source = source
    state.informed_count += 1
    newly.append(h.idx)
    if state.events is not None:
        state.events.append(Event(t, "household", h.idx, "informed", source.name.lower()))


def _advance_rescuer(state: SimulationState, r: RescuerState, budget: float) -> None:
    world = state.world
    rng = state.walk_rng
    adjacency = world.adjacency
    nodes = world.nodes
    while budget > 0.0:
        if r.edge_a < 0:  # standing on node r.node: pick an edge
            nbrs = adjacency[r.node]
            if not nbrs:
                return  # isolated node: nowhere to go
            if len(nbrs) > 1 and r.prev >= 0:
                choices = [nb for nb, _ in nbrs if nb != r.prev]
            else:
                choices = [nb for nb, _ in nbrs]
            nxt = choices[rng.randrange(len(choices))] if len(choices) > 1 else choices[0]
            r.edge_a = r.node
            r.edge_b = nxt
            r.edge_len = next(length for nb, length in nbrs if nb == nxt)
            r.progress = 0.0
        remaining = r.edge_len - r.progress
        if budget < remaining:
            r.progress += budget
            budget = 0.0
        else:
            budget -= remaining
            r.prev = r.edge_a
            r.node = r.edge_b
            r.edge_a = -1
            r.edge_b = -1
            r.progress = 0.0
    if r.edge_a >= 0:
        pa = nodes[r.edge_a]
        pb = nodes[r.edge_b]
        f = r.progress / r.edge_len if r.edge_len > 0 else 0.0
        r.x = pa.x + (pb.x - pa.x) * f
        r.y = pa.y + (pb.y - pa.y) * f
    else:
        p = nodes[r.node]
        r.x, r.y = p.x, p.y


def step(state: SimulationState) -> SimulationState:
    """Advance one tick in place and return the state."""
    if state.tick >= state.cfg.max_ticks:
        raise InputError("step called past max_ticks")
    state.tick += 1
    t = state.tick
    cfg = state.cfg
    households = state.households
    index = state.index
    newly_informed: list[int] = []

    if state.informed_count < len(households):
        # (1) rescuers roam; (2) they inform unaware households in range
        budget = cfg.rescuer_speed * cfg.tick_seconds
        radius = cfg.rescuer_radius
        for r in state.rescuers:
            _advance_rescuer(state, r, budget)
            if r.edge_a >= 0:
                key = (r.edge_a, r.edge_b) if r.edge_a < r.edge_b else (r.edge_b, r.edge_a)
                candidates = index.edge_candidates.get(key, ())
            else:
                candidates = _node_candidates(index, state.world, r.node)
            rx, ry = r.x, r.y
            for hid in candidates:
                h = households[hid]
                if h.status == UNAWARE and math.hypot(h.x - rx, h.y - ry) <= radius:
                    _inform(state, h, WarningSource.AUTHORITIES, t, newly_informed)
        # (3) fallback channel fires on its pre-drawn tick
        for hid in state.fallback_schedule.pop(t, ()):
            h = households[hid]
            if h.status == UNAWARE:
                _inform(state, h, h.fallback_source, t, newly_informed)

    # (4) newly informed households assess risk and decide
    if newly_informed:
        newly_informed.sort()
        scenario = cfg.scenario
        weights = cfg.weights
        w1, w2, w3 = weights.w_cdm, weights.w_hrf, weights.w_crf
        highest = highest_possible_score(weights)
        for hid in newly_informed:
            h = households[hid]
            hrf = (
                scenario.storm_severity
                + scenario.rainfall_severity
                + index.proximity[hid].code
                + h.source.code
                + scenario.time_of_day
            )
            cdm = state.cdm_cache[hid]
            crf = crf_score(h.profile)
            value = cdm * w1 + hrf * w2 + crf * w3 + h.epsilon
            h.breakdown = RiskBreakdown(cdm, hrf, crf, value, highest)
            h.decision = decide(h.breakdown, cfg.threshold)
            if state.events is not None:
                state.events.append(Event(
                    t, "household", hid, "decided",
                    f"{h.decision.value} perceived={value:.6f} highest={highest:.6f}",
                ))
            if h.decision is Decision.EVACUATE:
                state.evacuate_decisions += 1
                h.status = EVACUATING
                _start_evacuation(state, h, t)
                state.moving.append(h)
            else:
                state.stay_decisions += 1
                h.status = STAYING
                state.terminal_count += 1

    # (5) evacuating households walk; (6) shelter managers admit or redirect
    if state.moving:
        move = cfg.household_speed * cfg.tick_seconds
        nodes = state.world.nodes
        still_moving: list[HouseholdState] = []
        for h in state.moving:
            if h.stranded:
                still_moving.append(h)
                continue
            budget = move
            route = h.route
            while budget > 0.0 and h.leg < len(route) - 1:
                a = nodes[route[h.leg]]
                b = nodes[route[h.leg + 1]]
                leg_len = math.hypot(b.x - a.x, b.y - a.y)
                remaining = leg_len - h.progress
                if budget < remaining:
                    h.progress += budget
                    budget = 0.0
                    f = h.progress / leg_len
                    h.x = a.x + (b.x - a.x) * f
                    h.y = a.y + (b.y - a.y) * f
                else:
                    budget -= remaining
                    h.leg += 1
                    h.progress = 0.0
                    h.x, h.y = b.x, b.y
            _try_admission(state, h, t)
            if h.status == EVACUATING:
                still_moving.append(h)
        state.moving = still_moving

    state.time_series.append(state.evacuate_decisions)
    return state


def _node_candidates(index: WorldIndex, world: World, node: int) -> tuple[int, ...]:
    # A rescuer exactly on a node perceives along every incident edge. Rare
    # (only before its first move), so unioning on the fly is fine.
    seen: list[int] = []
    got: set[int] = set()
    for nbr, _ in world.adjacency[node]:
        key = (node, nbr) if node < nbr else (nbr, node)
        for hid in index.edge_candidates.get(key, ()):
            if hid not in got:
                got.add(hid)
                seen.append(hid)
    return tuple(seen)


def _try_admission(state: SimulationState, h: HouseholdState, t: int) -> None:
    if h.target_shelter is None or h.stranded:
        return
    index = state.index
    shelter = index.shelters_by_id[h.target_shelter]
    spos = state.world.nodes[shelter.node]
    if math.hypot(h.x - spos.x, h.y - spos.y) > state.cfg.shelter_radius:
        return
    members = h.profile.members
    if _would_fit(state, shelter, members):
        state.occupancy[shelter.id] += members
        state.admitted[shelter.id] += 1
        if not shelter.external and state.occupancy[shelter.id] > shelter.capacity:
            raise InternalError(
                f"shelter {shelter.id} over capacity: "
                f"{state.occupancy[shelter.id]} > {shelter.capacity}"
            )
        h.status = SHELTERED
        state.terminal_count += 1
        if state.events is not None:
            state.events.append(Event(
                t, "household", h.idx, "admitted",
                f"shelter={shelter.id} occupancy={state.occupancy[shelter.id]}",
            ))
        return
    # Full: redirect to the next-nearest shelter that would fit, measured
    # from the full shelter's node; the household finishes the walk there
    # before heading out again.
    h.tried_shelters.add(shelter.id)
    target = _pick_shelter(state, shelter.node, members, exclude=h.tried_shelters)
    if target is None:
        h.stranded = True
        if state.events is not None:
            state.events.append(Event(
                t, "household", h.idx, "stranded", f"no capacity anywhere after shelter={shelter.id}",
            ))
        return
    tail = state.index.route_to_shelter(shelter.node, target)
    h.route = h.route[h.leg:] + tail[1:]
    h.leg = 0
    h.target_shelter = target
    if state.events is not None:
        state.events.append(Event(
            t, "household", h.idx, "redirected", f"from={shelter.id} to={target}",
        ))


def run(
    world: World,
    profiles: list[HouseholdProfile],
    cfg: RunConfig,
    index: WorldIndex | None = None,
    collect_events: bool = True,
) -> RunResult:
    """Step until every household is terminal or max_ticks is reached."""
    state = init_run(world, profiles, cfg, index=index, collect_events=collect_events)
    n = len(state.households)
    while state.terminal_count < n and state.tick < cfg.max_ticks:
        step(state)
    truncated = state.terminal_count < n
    if not truncated:
        for h in state.households:
            if h.status not in (SHELTERED, STAYING):
                raise InternalError(
                    f"household {h.idx} ended {STATUS_NAMES[h.status]} at natural termination"
                )
    if state.evacuate_decisions != sum(
        1 for h in state.households if h.decision is Decision.EVACUATE
    ):
        raise InternalError("evacuate decision counter out of sync")
    return RunResult(
        evacuated=state.evacuate_decisions,
        ticks_elapsed=state.tick,
        truncated=truncated,
        time_series=state.time_series,
        sheltered_by_shelter=dict(state.admitted),
        shelter_occupancy=dict(state.occupancy),
        stayed=state.stay_decisions,
        events=state.events,
    )


def event_log_csv(events: list[Event]) -> str:
    lines = ["tick,agent_kind,agent_id,event,detail"]
    for e in events:
        detail = e.detail.replace(",", ";")
        lines.append(f"{e.tick},{e.agent_kind},{e.agent_id},{e.event},{detail}")
    return "\n".join(lines) + "\n"
