"""Neighborhood systems on finite sample spaces.

A neighborhood system is an undirected, loop-free graph G on the points of a
space. b(y) denotes the neighbors of y and n(y) = b(y) + {y}; n(y) is always
derived, never stored. From G two derived graphs on an active subset Y0 are
built: one joins points whose n-neighborhoods intersect, the other points
whose b-neighborhoods intersect. Their connectivity, together with coverage
of the space by the active neighborhoods, decides whether a composite local
Bregman divergence separates distinct probabilities; `diagnose` packages that
decision.

All graph values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

import numpy as np

from .errors import InputError
from .spaces import SampleSpace


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NeighborhoodGraph:
    """Symmetric loop-free adjacency over the points of a space.

    adjacency[i] is the sorted array of neighbor indices b(i).
    """

    space: SampleSpace
    adjacency: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.adjacency) != self.space.size:
            raise InputError("adjacency must list every point of the space")
        _validate_adjacency(self.adjacency, self.space.size)

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> list[tuple[int, int]]:
        """Canonical (min, max) edge list in lexicographic order."""
        out = []
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    out.append((i, int(j)))
        return out


def _validate_adjacency(adjacency, size: int) -> None:
    seen = set()
    for i, nbrs in enumerate(adjacency):
        arr = np.asarray(nbrs)
        if arr.size and (arr.min() < 0 or arr.max() >= size):
            raise InputError(f"neighbor of point {i} outside the space")
        if np.any(arr == i):
            raise InputError(f"loop at point {i}")
        if arr.size > 1 and np.any(np.diff(arr) <= 0):
            raise InputError(f"adjacency of point {i} not sorted/distinct")
        for j in arr:
            seen.add((i, int(j)))
    for i, j in seen:
        if (j, i) not in seen:
            raise InputError(f"asymmetric adjacency: {i}->{j} without {j}->{i}")


def graph_from_edges(space: SampleSpace, edges) -> NeighborhoodGraph:
    """Build a graph from an iterable of index pairs (either orientation)."""
    nbrs: list[set[int]] = [set() for _ in range(space.size)]
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise InputError(f"loop edge ({i},{i})")
        if not (0 <= i < space.size and 0 <= j < space.size):
            raise InputError(f"edge ({i},{j}) outside the space")
        nbrs[i].add(j)
        nbrs[j].add(i)
    adjacency = tuple(_freeze(np.array(sorted(s), dtype=np.int64)) for s in nbrs)
    return NeighborhoodGraph(space=space, adjacency=adjacency)


def masks_up_to_weight(dim: int, radius: int) -> list[int]:
    """All nonzero bit masks over `dim` bits with at most `radius` set bits,
    generated combinatorially (dim can be far beyond enumeration size)."""
    from itertools import combinations

    out = []
    for weight in range(1, radius + 1):
        for bits in combinations(range(dim), weight):
            out.append(sum(1 << b for b in bits))
    return out


def hamming_graph(dim: int, radius: int) -> NeighborhoodGraph:
    """Hypercube graph joining sign vectors at Hamming distance 1..radius."""
    if not 1 <= radius <= dim:
        raise InputError(f"radius must be in 1..{dim}, got {radius}")
    space = SampleSpace.hypercube(dim)
    space.require_enumerable("hamming_graph")
    masks = np.array(masks_up_to_weight(dim, radius), dtype=np.int64)
    adjacency = tuple(_freeze(np.sort(i ^ masks)) for i in range(space.size))
    return NeighborhoodGraph(space=space, adjacency=adjacency)


def label_band_graph(num_labels: int, band: int) -> NeighborhoodGraph:
    """Graph on labels 0..L-1 joining y,z iff 1 <= |y-z| <= band."""
    if not 1 <= band < num_labels:
        raise InputError(f"band must be in 1..{num_labels - 1}, got {band}")
    space = SampleSpace.label_range(num_labels)
    adjacency = tuple(
        _freeze(
            np.concatenate(
                [
                    np.arange(max(0, y - band), y, dtype=np.int64),
                    np.arange(y + 1, min(num_labels, y + band + 1), dtype=np.int64),
                ]
            )
        )
        for y in range(num_labels)
    )
    return NeighborhoodGraph(space=space, adjacency=adjacency)


def extended_graph(graph: NeighborhoodGraph) -> NeighborhoodGraph:
    """Add an edge between every pair of distinct points sharing a neighbor.

    The original edges are kept, so the result always contains the input.
    """
    extra: list[set[int]] = [set(map(int, a)) for a in graph.adjacency]
    for nbrs in graph.adjacency:
        ns = nbrs.tolist()
        for a in range(len(ns)):
            for b in range(a + 1, len(ns)):
                extra[ns[a]].add(ns[b])
                extra[ns[b]].add(ns[a])
    adjacency = tuple(_freeze(np.array(sorted(s), dtype=np.int64)) for s in extra)
    return NeighborhoodGraph(space=graph.space, adjacency=adjacency)


@dataclass(frozen=True)
class VertexGraph:
    """A plain graph over an explicit vertex list (derived graphs live here).

    `vertices` are original point indices; adjacency is positional.
    """

    vertices: tuple[int, ...]
    adjacency: tuple[np.ndarray, ...]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for a, nbrs in enumerate(self.adjacency):
            for b in nbrs:
                if a < b:
                    out.append((self.vertices[a], self.vertices[int(b)]))
        return out


def _sorted_intersects(a: np.ndarray, b: np.ndarray) -> bool:
    """Two-pointer merge test: do two sorted index lists share an element?"""
    ia = ib = 0
    la, lb = len(a), len(b)
    while ia < la and ib < lb:
        va, vb = a[ia], b[ib]
        if va == vb:
            return True
        if va < vb:
            ia += 1
        else:
            ib += 1
    return False


def _check_subset(graph: NeighborhoodGraph, active) -> list[int]:
    active = sorted(int(y) for y in active)
    if not active:
        raise InputError("active subset must be nonempty")
    if len(set(active)) != len(active):
        raise InputError("active subset has repeats")
    if active[0] < 0 or active[-1] >= graph.space.size:
        raise InputError("active subset outside the space")
    return active


def _intersection_graph(graph, active, include_self: bool) -> VertexGraph:
    verts = _check_subset(graph, active)
    if include_self:
        sets = [np.union1d(graph.adjacency[y], [y]) for y in verts]
    else:
        sets = [graph.adjacency[y] for y in verts]
    adjacency: list[list[int]] = [[] for _ in verts]
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            if _sorted_intersects(sets[a], sets[b]):
                adjacency[a].append(b)
                adjacency[b].append(a)
    return VertexGraph(
        vertices=tuple(verts),
        adjacency=tuple(_freeze(np.array(sorted(s), dtype=np.int64)) for s in adjacency),
    )


def derived_graph_n(graph: NeighborhoodGraph, active) -> VertexGraph:
    """Graph on Y0 joining y != y' whenever n(y) and n(y') intersect."""
    return _intersection_graph(graph, active, include_self=True)


def derived_graph_b(graph: NeighborhoodGraph, active) -> VertexGraph:
    """Graph on Y0 joining y != y' whenever b(y) and b(y') intersect."""
    return _intersection_graph(graph, active, include_self=False)


def _adjacency_and_count(graph) -> tuple[tuple[np.ndarray, ...], int]:
    if isinstance(graph, NeighborhoodGraph):
        return graph.adjacency, graph.space.size
    return graph.adjacency, graph.num_vertices


def components(graph) -> list[list[int]]:
    """Connected components by breadth-first traversal, vertices sorted."""
    adjacency, n = _adjacency_and_count(graph)
    seen = [False] * n
    out = []
    for start in range(n):
        if seen[start]:
            continue
        comp = []
        queue = deque([start])
        seen[start] = True
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in adjacency[v]:
                w = int(w)
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        out.append(comp)
    return out


def is_connected(graph) -> bool:
    adjacency, n = _adjacency_and_count(graph)
    if n == 0:
        return True
    seen = [False] * n
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        v = queue.popleft()
        for w in adjacency[v]:
            w = int(w)
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def covers(graph: NeighborhoodGraph, active, mode: str) -> bool:
    """Does the union of n(y) (mode 'n') or b(y) (mode 'b') over Y0 equal Y?"""
    verts = _check_subset(graph, active)
    if mode not in ("n", "b"):
        raise InputError(f"mode must be 'n' or 'b', got {mode!r}")
    hit = np.zeros(graph.space.size, dtype=bool)
    for y in verts:
        hit[graph.adjacency[y]] = True
        if mode == "n":
            hit[y] = True
    return bool(hit.all())


@dataclass(frozen=True)
class BlockSystem:
    """Coordinate index sets A_1..A_m over a hypercube {-1,+1}^D.

    Coordinates are 1-based, matching the usual statement of composite
    likelihoods; `masks` exposes 0-based bit masks.
    """

    dim: int
    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("block system needs a positive dimension")
        if not self.blocks:
            raise InputError("block system needs at least one block")
        for block in self.blocks:
            if not block:
                raise InputError("blocks must be nonempty")
            if any(not 1 <= i <= self.dim for i in block):
                raise InputError(f"block {set(block)} outside 1..{self.dim}")

    @staticmethod
    def of(dim: int, *blocks) -> "BlockSystem":
        return BlockSystem(dim=dim, blocks=tuple(frozenset(b) for b in blocks))

    @staticmethod
    def singletons(dim: int) -> "BlockSystem":
        return BlockSystem.of(dim, *({i} for i in range(1, dim + 1)))

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << (i - 1) for i in block) for block in self.blocks)

    def covers_all_coordinates(self) -> bool:
        union = frozenset().union(*self.blocks)
        return union == frozenset(range(1, self.dim + 1))

    def spec_string(self) -> str:
        return ";".join(",".join(str(i) for i in sorted(b)) for b in self.blocks)


def parse_blocks(text: str, dim: int) -> BlockSystem:
    """Parse `1,2;3,4` style block lists (1-based coordinates)."""
    try:
        blocks = [frozenset(int(t) for t in part.split(",")) for part in text.split(";")]
    except ValueError as exc:
        raise InputError(f"bad block spec {text!r}") from exc
    return BlockSystem(dim=dim, blocks=tuple(blocks))


def block_neighbor_arrays(system: BlockSystem, index: int) -> list[np.ndarray]:
    """b_l(y) for each block: flip any nonempty subset of the block's bits."""
    out = []
    for mask in system.masks:
        submasks = _nonzero_submasks(mask)
        out.append(np.sort(np.array([index ^ m for m in submasks], dtype=np.int64)))
    return out


def _nonzero_submasks(mask: int) -> list[int]:
    sub = mask
    out = []
    while sub:
        out.append(sub)
        sub = (sub - 1) & mask
    return out


def cl_neighborhood(system: BlockSystem):
    """Materialize the block-conditional neighborhood system on {-1,+1}^D.

    Returns the union graph (b(y) = union of the b_l(y)) and the per-point
    per-block neighbor lists.
    """
    space = SampleSpace.hypercube(system.dim)
    space.require_enumerable("cl_neighborhood")
    per_point = []
    adjacency = []
    for i in range(space.size):
        blocks = block_neighbor_arrays(system, i)
        per_point.append(tuple(_freeze(b) for b in blocks))
        union = np.unique(np.concatenate(blocks))
        adjacency.append(_freeze(union))
    graph = NeighborhoodGraph(space=space, adjacency=tuple(adjacency))
    return graph, tuple(per_point)


def cl_connectivity_matches_cover(system: BlockSystem) -> bool:
    """Self-test: block-union coverage of {1..D} must equal connectivity of
    the derived n-intersection graph over the whole space."""
    graph, _ = cl_neighborhood(system)
    derived = derived_graph_n(graph, range(graph.space.size))
    return is_connected(derived) == system.covers_all_coordinates()


STRICTLY_CONVEX = "strictly-convex"
PSEUDO_SPHERICAL = "pseudo-spherical"


@dataclass(frozen=True)
class GraphDiagnostics:
    """Graph-side facts that decide whether coincidence is guaranteed."""

    covers_n: bool
    covers_b: bool
    g0_connected: bool
    g0prime_connected: bool
    component_count_g0prime: int
    potential_class: str
    guaranteed: bool


def diagnose(graph: NeighborhoodGraph, active, potential_class: str) -> GraphDiagnostics:
    """Decide the coincidence guarantee for a potential class on (G, Y0).

    Strictly convex local potentials need n-coverage plus a connected
    n-intersection graph; pseudo-spherical ones need b-coverage plus a
    connected b-intersection graph.
    """
    if potential_class not in (STRICTLY_CONVEX, PSEUDO_SPHERICAL):
        raise InputError(f"unknown potential class {potential_class!r}")
    covers_n = covers(graph, active, "n")
    covers_b = covers(graph, active, "b")
    g0 = derived_graph_n(graph, active)
    g0prime = derived_graph_b(graph, active)
    g0_connected = is_connected(g0)
    comps = components(g0prime)
    g0prime_connected = len(comps) == 1
    if potential_class == STRICTLY_CONVEX:
        guaranteed = covers_n and g0_connected
    else:
        guaranteed = covers_b and g0prime_connected
    return GraphDiagnostics(
        covers_n=covers_n,
        covers_b=covers_b,
        g0_connected=g0_connected,
        g0prime_connected=g0prime_connected,
        component_count_g0prime=len(comps),
        potential_class=potential_class,
        guaranteed=guaranteed,
    )


def write_edge_list(graph: NeighborhoodGraph, path) -> None:
    """Edge-list text file: header `space <kind> <param>`, then `i j` lines."""
    space = graph.space
    param = space.dim if space.kind == "hypercube" else space.size
    lines = [f"space {space.kind} {param}"]
    lines += [f"{i} {j}" for i, j in graph.edges()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path) -> NeighborhoodGraph:
    with open(path) as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw or not raw[0].startswith("space "):
        raise InputError(f"{path}: missing `space <kind> <param>` header")
    try:
        _, kind, param = raw[0].split()
        param = int(param)
    except ValueError as exc:
        raise InputError(f"{path}: bad header {raw[0]!r}") from exc
    if kind == "hypercube":
        space = SampleSpace.hypercube(param)
    elif kind == "labels":
        space = SampleSpace.label_range(param)
    elif kind == "enumerated":
        space = SampleSpace.enumerated([f"p{i}" for i in range(param)])
    else:
        raise InputError(f"{path}: unknown space kind {kind!r}")
    edges = []
    for lineno, line in enumerate(raw[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected `i j`, got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return graph_from_edges(space, edges)
