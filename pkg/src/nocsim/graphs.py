"""Application task graphs and mesh architecture graphs.

The application side is a weighted DAG of tasks (optionally coarsened
into clusters before mapping); the platform side is a 2D or 3D mesh of
tiles joined by directed links.
"""

import random
from dataclasses import dataclass, field

from .errors import (
    CycleError,
    DanglingEdgeError,
    InfeasibleK,
    RangeError,
    UnknownTile,
    ZeroDimensionError,
)

CRITICAL = "critical"
NON_CRITICAL = "non-critical"

# Direction names shared with the routing layer.  Order matters: it is the
# canonical order for connectivity bits and link enumeration.
DIRS_2D = ("N", "E", "W", "S")
DIRS_3D = ("N", "E", "W", "S", "U", "D")
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E", "U": "D", "D": "U", "L": "L"}
DIR_VECTORS = {
    "N": (0, 1, 0),
    "S": (0, -1, 0),
    "E": (1, 0, 0),
    "W": (-1, 0, 0),
    "U": (0, 0, 1),
    "D": (0, 0, -1),
}


@dataclass(frozen=True)
class Task:
    """One schedulable unit of the application.

    `slack`, when set on a critical task, defines its deadline as
    release + slack; mapping candidates violating it are rejected.
    """

    id: int
    wcet: int
    release: int = 0
    criticality: str = NON_CRITICAL
    slack: int = None


class TaskGraph:
    """Immutable weighted DAG of tasks.

    Task ids are dense (0..m-1) so mappings can be plain lists indexed
    by task id.  Edge weights model communication volume.
    """

    def __init__(self, tasks, edges, _order):
        self.tasks = tasks                  # tuple of Task, index == id
        self.edges = edges                  # dict (src, dst) -> weight
        self._topo = _order                 # tuple of task ids
        self._preds = {t.id: [] for t in tasks}
        self._succs = {t.id: [] for t in tasks}
        for (a, b) in sorted(edges):
            self._preds[b].append(a)
            self._succs[a].append(b)

    def __len__(self):
        return len(self.tasks)

    def task(self, task_id):
        return self.tasks[task_id]

    def predecessors(self, task_id):
        return self._preds[task_id]

    def successors(self, task_id):
        return self._succs[task_id]

    def topological_order(self):
        return self._topo


def build_task_graph(tasks, edges):
    """Validate and assemble a TaskGraph.

    tasks: iterable of Task (ids must be exactly 0..m-1, wcet > 0).
    edges: mapping (src, dst) -> weight or iterable of (src, dst, weight).
    """
    tasks = sorted(tasks, key=lambda t: t.id)
    ids = [t.id for t in tasks]
    if ids != list(range(len(tasks))):
        raise RangeError(f"task ids must be dense 0..{len(tasks) - 1}, got {ids}")
    for t in tasks:
        if t.wcet <= 0:
            raise RangeError(f"task {t.id}: wcet must be positive, got {t.wcet}")
        if t.release < 0:
            raise RangeError(f"task {t.id}: release must be >= 0, got {t.release}")
        if t.criticality not in (CRITICAL, NON_CRITICAL):
            raise RangeError(f"task {t.id}: unknown criticality {t.criticality!r}")
        if t.slack is not None and t.slack < 0:
            raise RangeError(f"task {t.id}: slack must be >= 0, got {t.slack}")

    if not isinstance(edges, dict):
        edges = {(a, b): w for (a, b, w) in edges}
    known = set(range(len(tasks)))
    for (a, b), w in edges.items():
        if a not in known or b not in known:
            raise DanglingEdgeError(f"edge ({a}, {b}) references a missing task")
        if a == b:
            raise CycleError(f"self edge on task {a}")
        if w <= 0:
            raise RangeError(f"edge ({a}, {b}): weight must be positive, got {w}")

    order = _topological_order(len(tasks), edges)
    return TaskGraph(tuple(tasks), dict(edges), order)


def _topological_order(n, edges):
    """Kahn's algorithm; ties broken by task id. Raises CycleError."""
    indeg = [0] * n
    succs = {i: [] for i in range(n)}
    for (a, b) in edges:
        indeg[b] += 1
        succs[a].append(b)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order = []
    while ready:
        ready.sort()
        node = ready.pop(0)
        order.append(node)
        for nxt in succs[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    if len(order) != n:
        stuck = sorted(i for i in range(n) if indeg[i] > 0)
        raise CycleError(f"dependency cycle through tasks {stuck}")
    return tuple(order)


def random_task_graph(n, density, seed, wcet_range=(1, 20), weight_range=(1, 10)):
    """Random layered-free DAG: each pair (i, j), i < j, becomes an edge
    with probability `density`; edge direction follows task id order so
    the result is acyclic by construction.  Deterministic for a seed.
    """
    if n <= 0:
        raise RangeError(f"task count must be positive, got {n}")
    if not 0.0 <= density <= 1.0:
        raise RangeError(f"density must be in [0, 1], got {density}")
    rng = random.Random(seed)
    tasks = [Task(i, rng.randint(*wcet_range)) for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges[(i, j)] = rng.randint(*weight_range)
    return build_task_graph(tasks, edges)


# ---------------------------------------------------------------------------
# Clustering


class ClusteredTaskGraph:
    """Coarsened view of a TaskGraph: clusters are mapped as units.

    Inter-cluster edge weight is the sum of crossing task-edge weights;
    intra-cluster edges disappear.
    """

    def __init__(self, tg, clusters):
        self.tg = tg
        self.clusters = clusters            # tuple of frozenset, canonical order
        self.task_cluster = {}
        for ci, members in enumerate(clusters):
            for t in members:
                self.task_cluster[t] = ci
        self.edges = {}
        for (a, b), w in tg.edges.items():
            ca, cb = self.task_cluster[a], self.task_cluster[b]
            if ca != cb:
                self.edges[(ca, cb)] = self.edges.get((ca, cb), 0) + w

    def __len__(self):
        return len(self.clusters)

    def cut_weight(self):
        return sum(self.edges.values())


def _canonical_clusters(groups):
    groups = [frozenset(g) for g in groups if g]
    return tuple(sorted(groups, key=min))


def cluster_tasks(tg, k, heuristic="greedy-merge", seed=0):
    """Partition tasks into exactly k non-empty clusters, minimizing the
    total weight of inter-cluster edges.

    heuristic: "greedy-merge" repeatedly merges the cluster pair joined
    by the heaviest inter-cluster weight; "local-search" refines that
    result with seeded single-task moves.
    """
    m = len(tg)
    if not 1 <= k <= m:
        raise InfeasibleK(f"cluster count must be in 1..{m}, got {k}")

    groups = [{i} for i in range(m)]
    while len(groups) > k:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                w = _inter_weight(tg, groups[i], groups[j])
                key = (-w, min(groups[i]), min(groups[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        _, i, j = best
        groups[i] |= groups[j]
        del groups[j]

    if heuristic == "local-search":
        groups = _local_search(tg, groups, seed)
    elif heuristic != "greedy-merge":
        raise RangeError(f"unknown clustering heuristic {heuristic!r}")

    return ClusteredTaskGraph(tg, _canonical_clusters(groups))


def _inter_weight(tg, ga, gb):
    w = 0
    for (a, b), weight in tg.edges.items():
        if (a in ga and b in gb) or (a in gb and b in ga):
            w += weight
    return w


def _cut_of(tg, groups):
    owner = {}
    for gi, g in enumerate(groups):
        for t in g:
            owner[t] = gi
    return sum(w for (a, b), w in tg.edges.items() if owner[a] != owner[b])


def _local_search(tg, groups, seed, rounds=50):
    """Move single tasks between clusters while the cut improves.

    Moves that would empty a cluster are skipped (k is fixed).
    """
    rng = random.Random(seed)
    groups = [set(g) for g in groups]
    best_cut = _cut_of(tg, groups)
    for _ in range(rounds):
        improved = False
        tasks = list(range(len(tg)))
        rng.shuffle(tasks)
        for t in tasks:
            src = next(i for i, g in enumerate(groups) if t in g)
            if len(groups[src]) == 1:
                continue
            for dst in range(len(groups)):
                if dst == src:
                    continue
                groups[src].remove(t)
                groups[dst].add(t)
                cut = _cut_of(tg, groups)
                if cut < best_cut:
                    best_cut = cut
                    src = dst
                    improved = True
                else:
                    groups[dst].remove(t)
                    groups[src].add(t)
        if not improved:
            break
    return groups


# ---------------------------------------------------------------------------
# Platform


@dataclass(frozen=True)
class Tile:
    id: int
    coords: tuple


@dataclass(frozen=True)
class Link:
    """One directed mesh link. `direction` is the output port at `src`;
    the arrival port at `dst` is the opposite direction."""

    id: int
    src: int
    dst: int
    direction: str


class ArchitectureGraph:
    """Mesh of tiles (router plus processing element each)."""

    def __init__(self, dims, tiles, links):
        self.dims = dims                    # (w, h) or (w, h, d)
        self.tiles = tiles                  # tuple of Tile, index == id
        self.links = links                  # tuple of Link, index == id
        self._neighbor = {}                 # (tile, dir) -> tile
        self._link_at = {}                  # (tile, dir) -> Link
        for link in links:
            self._neighbor[(link.src, link.direction)] = link.dst
            self._link_at[(link.src, link.direction)] = link

    def __len__(self):
        return len(self.tiles)

    @property
    def is_3d(self):
        return len(self.dims) == 3

    def directions(self):
        return DIRS_3D if self.is_3d else DIRS_2D

    def check_tile(self, tile_id):
        if not 0 <= tile_id < len(self.tiles):
            raise UnknownTile(f"tile {tile_id} outside mesh of {len(self.tiles)}")
        return tile_id

    def coords(self, tile_id):
        return self.tiles[self.check_tile(tile_id)].coords

    def tile_at(self, coords):
        if len(coords) == 2:
            coords = (coords[0], coords[1], 0)
        x, y, z = coords
        w, h = self.dims[0], self.dims[1]
        d = self.dims[2] if self.is_3d else 1
        if not (0 <= x < w and 0 <= y < h and 0 <= z < d):
            raise UnknownTile(f"coords {coords} outside mesh {self.dims}")
        return x + y * w + z * w * h

    def neighbor(self, tile_id, direction):
        """Neighbor tile id in `direction`, or None at the boundary."""
        return self._neighbor.get((tile_id, direction))

    def link(self, tile_id, direction):
        """Outgoing link from tile in `direction`, or None at the boundary."""
        return self._link_at.get((tile_id, direction))


def build_mesh(width, height, depth=None):
    """Regular 2D (or, with depth, 3D) mesh with bidirectional links
    between lattice neighbors.  Link ids are assigned in (tile id,
    direction order) so enumeration is canonical.
    """
    dims = (width, height) if depth is None else (width, height, depth)
    if any(d <= 0 for d in dims):
        raise ZeroDimensionError(f"mesh dimensions must be positive, got {dims}")

    w, h = width, height
    d = depth if depth is not None else 1
    tiles = []
    for z in range(d):
        for y in range(h):
            for x in range(w):
                tid = x + y * w + z * w * h
                coords = (x, y) if depth is None else (x, y, z)
                tiles.append(Tile(tid, coords))

    dirs = DIRS_3D if depth is not None else DIRS_2D
    links = []
    for tile in tiles:
        x, y = tile.coords[0], tile.coords[1]
        z = tile.coords[2] if depth is not None else 0
        for direction in dirs:
            dx, dy, dz = DIR_VECTORS[direction]
            nx, ny, nz = x + dx, y + dy, z + dz
            if 0 <= nx < w and 0 <= ny < h and 0 <= nz < d:
                dst = nx + ny * w + nz * w * h
                links.append(Link(len(links), tile.id, dst, direction))

    return ArchitectureGraph(dims, tuple(tiles), tuple(links))
