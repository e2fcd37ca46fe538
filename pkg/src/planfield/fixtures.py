"""Deterministic synthetic fixtures for desk-scale validation.

Everything here is reproducible from a seed. Random draws use NumPy's
PCG64 generator seeded with ``(seed, plan_index)`` sequences, so plan
streams are independent and bit-identical across runs and platforms.

* :func:`generate_grid_map` builds rook-adjacency grids of unit squares.
* :func:`sample_plans` draws balanced contiguous plans by cutting random
  spanning trees (random-weight Kruskal trees; the cut edge is uniform
  among the feasible cuts of each tree). The sampler targets its own null
  distribution; no claim is made about matching any external sampler.
* :func:`enumerate_plans` exhaustively lists all valid plans of tiny maps
  and is the oracle the statistical machinery is validated against.
* :func:`plant_outlier` perturbs a plan by swapping boundary precincts
  between a pack district and a crack district, concentrating one party's
  voters, and reports the ground-truth perturbed precincts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FixtureError, ValidationError
from .model import Ensemble, Plan, PrecinctMap, validate_plan

ENUMERATION_CAP = 16


@dataclass(frozen=True)
class GridSpec:
    """Parameters of a synthetic rows x cols grid map.

    ``pop_model``: ``uniform`` (all ``pop_base``) or ``gradient``
    (``pop_base`` plus a linear ramp along row+column).
    ``share_model``: Democratic vote share per precinct; ``uniform``
    (``share_base`` everywhere), ``gradient`` (0.25..0.75 ramp), or
    ``hotspot`` (``share_base`` plus a Gaussian bump of ``hotspot_intensity``
    decaying with distance from ``hotspot_center`` at scale
    ``hotspot_radius``).
    ``pop_jitter`` adds seeded integer noise in ``0..pop_jitter`` to each
    precinct's population.
    """

    rows: int
    cols: int
    pop_model: str = "uniform"
    pop_base: int = 100
    share_model: str = "uniform"
    share_base: float = 0.5
    hotspot_center: tuple[float, float] | None = None
    hotspot_radius: float = 3.0
    hotspot_intensity: float = 0.3
    pop_jitter: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise FixtureError("grid needs rows >= 1 and cols >= 1")
        if self.pop_model not in ("uniform", "gradient"):
            raise FixtureError(f"unknown pop_model {self.pop_model!r}")
        if self.share_model not in ("uniform", "gradient", "hotspot"):
            raise FixtureError(f"unknown share_model {self.share_model!r}")
        if self.pop_base < 1:
            raise FixtureError("pop_base must be positive")
        if self.share_model == "hotspot":
            if not 0.0 < self.share_base + self.hotspot_intensity < 1.0 or not (
                0.0 < self.share_base < 1.0
            ):
                raise FixtureError("hotspot shares must stay strictly inside (0, 1)")
            if self.hotspot_radius <= 0:
                raise FixtureError("hotspot_radius must be positive")


def grid_id(row: int, col: int) -> str:
    return f"r{row}c{col}"


def generate_grid_map(spec: GridSpec) -> PrecinctMap:
    """Rook-adjacency grid of unit squares with model-driven attributes."""
    rows, cols = spec.rows, spec.cols
    n = rows * cols
    rr, cc = np.divmod(np.arange(n), cols)
    ids = tuple(grid_id(int(r), int(c)) for r, c in zip(rr, cc))

    pop = np.full(n, float(spec.pop_base))
    if spec.pop_model == "gradient":
        step = max(1, spec.pop_base // (rows + cols))
        pop = pop + step * (rr + cc)
    if spec.pop_jitter > 0:
        rng = np.random.default_rng([spec.seed, rows, cols])
        pop = pop + rng.integers(0, spec.pop_jitter + 1, size=n)

    if spec.share_model == "uniform":
        share = np.full(n, spec.share_base)
    elif spec.share_model == "gradient":
        span = (rows - 1) + (cols - 1)
        share = np.full(n, spec.share_base) if span == 0 else 0.25 + 0.5 * (rr + cc) / span
    else:
        center = spec.hotspot_center or ((rows - 1) / 2.0, (cols - 1) / 2.0)
        dist = np.hypot(rr - center[0], cc - center[1])
        share = spec.share_base + spec.hotspot_intensity * np.exp(
            -((dist / spec.hotspot_radius) ** 2)
        )

    votes_dem = share * pop
    votes_rep = pop - votes_dem

    edge_rows = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edge_rows.append((v, v + 1))
            if r + 1 < rows:
                edge_rows.append((v, v + cols))
    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)

    degree = np.zeros(n)
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1

    return PrecinctMap(
        ids=ids,
        attributes={
            "population": pop,
            "area": np.ones(n),
            "exterior_boundary_length": 4.0 - degree,
            "votes_dem": votes_dem,
            "votes_rep": votes_rep,
        },
        edges=edges,
        shared_boundary_length=np.ones(len(edges)),
    )


# ---------------------------------------------------------------------------
# spanning-tree sampler


def _integral_populations(pmap: PrecinctMap) -> np.ndarray:
    """Populations as int64 when integral so acceptance tests stay exact."""
    pop = pmap.attributes["population"]
    rounded = np.rint(pop)
    if np.array_equal(pop, rounded):
        return rounded.astype(np.int64)
    return pop


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _random_tree(n_local: int, local_edges: np.ndarray, rng) -> list[tuple[int, int]]:
    """Spanning tree from Kruskal on uniformly random edge weights."""
    order = np.argsort(rng.random(len(local_edges)), kind="stable")
    uf = _UnionFind(n_local)
    tree = []
    for k in order:
        a, b = local_edges[k]
        if uf.union(int(a), int(b)):
            tree.append((int(a), int(b)))
            if len(tree) == n_local - 1:
                break
    return tree if len(tree) == n_local - 1 else []


def _draw_plan(pmap, d, pops, total, pop_tol, rng, budget):
    """One plan via d-1 successive tree cuts; returns (assignment, draws_used).

    The carved subtree must satisfy |d*pop - total| <= pop_tol*total (district
    population within tolerance of total/d); the final remainder is checked
    the same way. Returns (None, draws) once the budget is exhausted.
    """
    threshold = pop_tol * float(total)
    edges = pmap.edges
    n = pmap.size
    draws = 0
    fails_this_split = 0
    assignment = np.zeros(n, dtype=np.int32)
    remaining = np.ones(n, dtype=bool)
    label = 1

    while draws < budget:
        nodes = np.flatnonzero(remaining)
        if label == d:
            rem_pop = pops[remaining].sum()
            if abs(int(d) * rem_pop - total) <= threshold:
                assignment[remaining] = d
                return assignment, draws
            # remainder drifted out of tolerance: restart the plan
            assignment[:] = 0
            remaining[:] = True
            label = 1
            fails_this_split = 0
            continue

        mask_e = remaining[edges[:, 0]] & remaining[edges[:, 1]]
        sub = edges[mask_e]
        local_of = np.full(n, -1, dtype=np.int64)
        local_of[nodes] = np.arange(len(nodes))
        local_edges = local_of[sub]

        draws += 1
        tree = _random_tree(len(nodes), local_edges, rng)
        carved = None
        if tree:
            children: list[list[int]] = [[] for _ in range(len(nodes))]
            adj: list[list[int]] = [[] for _ in range(len(nodes))]
            for a, b in tree:
                adj[a].append(b)
                adj[b].append(a)
            parent = np.full(len(nodes), -1, dtype=np.int64)
            bfs = [0]
            seen = [False] * len(nodes)
            seen[0] = True
            for v in bfs:
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        parent[w] = v
                        children[v].append(w)
                        bfs.append(w)
            sub_pop = pops[nodes].copy()
            for v in reversed(bfs):
                p = parent[v]
                if p >= 0:
                    sub_pop[p] += sub_pop[v]
            candidates = [
                v
                for v in range(1, len(nodes))
                if abs(int(d) * sub_pop[v] - total) <= threshold
                and len(nodes) - _subtree_size_bound(v) >= 1
            ]
            if candidates:
                pick = candidates[int(rng.integers(len(candidates)))]
                member = np.zeros(len(nodes), dtype=bool)
                stack = [pick]
                while stack:
                    v = stack.pop()
                    member[v] = True
                    stack.extend(children[v])
                carved = nodes[member]

        if carved is None:
            fails_this_split += 1
            if fails_this_split >= 50:
                # geometry dead end: restart the whole plan
                assignment[:] = 0
                remaining[:] = True
                label = 1
                fails_this_split = 0
            continue

        assignment[carved] = label
        remaining[carved] = False
        label += 1
        fails_this_split = 0

    return None, draws


def _subtree_size_bound(v: int) -> int:
    # carving any proper subtree leaves at least the root behind
    return 1


def sample_plans(
    pmap: PrecinctMap,
    d: int,
    n: int,
    pop_tol: float,
    seed: int,
    *,
    draw_budget_per_plan: int = 1000,
) -> Ensemble:
    """Sample ``n`` balanced contiguous plans by random-tree bipartition.

    Deterministic in ``seed``: plan ``i`` consumes its own PCG64 stream
    seeded with ``(seed, i)``. On maps small enough to enumerate, an empty
    enumeration fails fast instead of burning the retry budget.
    """
    if d < 1:
        raise ValidationError("d must be >= 1")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if pop_tol < 0:
        raise ValidationError("pop_tol must be >= 0")
    if pmap.size <= ENUMERATION_CAP and not enumerate_plans(pmap, d, pop_tol):
        raise FixtureError(
            f"no balanced contiguous plan with d={d}, pop_tol={pop_tol} exists on this map"
        )

    pops = _integral_populations(pmap)
    total = pops.sum()
    rows = np.empty((n, pmap.size), dtype=np.int32)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        assignment, draws = _draw_plan(pmap, d, pops, total, pop_tol, rng, draw_budget_per_plan)
        if assignment is None:
            raise FixtureError(
                f"plan {i + 1}: no balanced contiguous plan found after {draws} tree draws"
            )
        rows[i] = assignment
    return Ensemble(pmap, rows, d)


# ---------------------------------------------------------------------------
# exhaustive enumeration


def _bit_components(mask: int, adj_bits: list[int]) -> list[int]:
    comps = []
    rem = mask
    while rem:
        comp = rem & -rem
        frontier = comp
        while frontier:
            nxt = 0
            f = frontier
            while f:
                low = f & -f
                f ^= low
                nxt |= adj_bits[low.bit_length() - 1]
            nxt &= mask & ~comp
            comp |= nxt
            frontier = nxt
        comps.append(comp)
        rem &= ~comp
    return comps


def enumerate_plans(pmap: PrecinctMap, d: int, pop_tol: float) -> list[Plan]:
    """All valid plans of a tiny map, one per canonical labeling.

    Backtracking over precincts in index order; precinct 0 always takes
    label 1 and each later precinct may open at most one new label, which
    deduplicates district relabelings. Pruning: district populations may
    not exceed tolerance, and a partial district none of whose components
    can still reach an unassigned precinct is dead.
    """
    n = pmap.size
    if n > ENUMERATION_CAP:
        raise ValidationError(
            f"enumeration is capped at {ENUMERATION_CAP} precincts; map has {n}"
        )
    if d < 1:
        raise ValidationError("d must be >= 1")
    if d > n:
        return []

    pops = _integral_populations(pmap)
    total = pops.sum()
    threshold = pop_tol * float(total)

    adj_bits = [0] * n
    for a, b in pmap.edges:
        adj_bits[a] |= 1 << int(b)
        adj_bits[b] |= 1 << int(a)

    full = (1 << n) - 1
    plans: list[Plan] = []
    assignment = np.zeros(n, dtype=np.int32)
    masks = [0] * (d + 1)
    dist_pop = [pops[0] * 0] * (d + 1)

    def viable(label: int, unassigned: int) -> bool:
        comps = _bit_components(masks[label], adj_bits)
        if len(comps) == 1:
            return True
        for comp in comps:
            reach = 0
            f = comp
            while f:
                low = f & -f
                f ^= low
                reach |= adj_bits[low.bit_length() - 1]
            if not reach & unassigned:
                return False
        return True

    def recurse(v: int, used: int) -> None:
        if v == n:
            if used != d:
                return
            for j in range(1, d + 1):
                if abs(int(d) * dist_pop[j] - total) > threshold:
                    return
                if len(_bit_components(masks[j], adj_bits)) != 1:
                    return
            plans.append(Plan(assignment.copy(), d, contiguity_verified=True))
            return
        if n - v < d - used:
            return
        bit = 1 << v
        cap = min(used + 1, d)
        for label in range(1, cap + 1):
            new_pop = dist_pop[label] + pops[v]
            if int(d) * new_pop - total > threshold:
                continue
            assignment[v] = label
            masks[label] |= bit
            dist_pop[label] = new_pop
            unassigned = full & ~(bit - 1) & ~bit  # precincts after v
            dead = False
            for j in range(1, max(used, label) + 1):
                if masks[j] and not viable(j, unassigned):
                    dead = True
                    break
            if not dead:
                recurse(v + 1, max(used, label))
            masks[label] &= ~bit
            dist_pop[label] = dist_pop[label] - pops[v]
        assignment[v] = 0

    recurse(0, 0)
    return plans


# ---------------------------------------------------------------------------
# planted pack/crack outlier


@dataclass(frozen=True)
class PlantedOutlier:
    """A perturbed plan plus the ground truth needed for power studies.

    ``perturbed`` lists every precinct belonging to a pack or crack district
    under the final plan (those districts' compositions were manipulated, so
    those precincts are genuine non-null locations); ``moved`` lists the
    precincts whose assignment actually changed.
    """

    plan: Plan
    perturbed: np.ndarray
    moved: np.ndarray
    pack_districts: tuple[int, ...]
    crack_districts: tuple[int, ...]


def plant_outlier(
    pmap: PrecinctMap,
    base_plan: Plan,
    pack_region,
    crack_region,
    *,
    pop_tol: float = 0.05,
    max_swaps: int | None = None,
    share_columns: tuple[str, str] = ("votes_dem", "votes_rep"),
) -> PlantedOutlier:
    """Swap boundary precincts so pack districts gain the first party's
    voters from crack districts, one balanced pair at a time.

    Each swap moves the highest-share crack-border precinct into a pack
    district and returns the lowest-share pack-border precinct, provided
    both districts stay contiguous and within ``pop_tol`` population
    balance. Fully deterministic. Raises when a nonempty request admits no
    valid swap at all.
    """
    pack = tuple(sorted(set(int(x) for x in pack_region)))
    crack = tuple(sorted(set(int(x) for x in crack_region)))
    if set(pack) & set(crack):
        raise ValidationError("pack and crack districts must be disjoint")
    for j in pack + crack:
        if not 1 <= j <= base_plan.d:
            raise ValidationError(f"district {j} not in 1..{base_plan.d}")
    if not pack and not crack:
        return PlantedOutlier(
            base_plan, np.array([], dtype=np.int64), np.array([], dtype=np.int64), (), ()
        )
    if not pack or not crack:
        raise ValidationError("need at least one pack and one crack district")

    num = pmap.attributes[share_columns[0]]
    den = num + pmap.attributes[share_columns[1]]
    share = np.divide(num, den, out=np.full(pmap.size, 0.5), where=den > 0)

    assignment = base_plan.assignment.copy()
    d = base_plan.d
    pops = pmap.attributes["population"]
    target = pops.sum() / d
    neighbors = pmap.neighbors

    def district_ok(label: int, asg: np.ndarray) -> bool:
        members = np.flatnonzero(asg == label)
        if members.size == 0:
            return False
        pop = pops[members].sum()
        if abs(pop - target) > pop_tol * target:
            return False
        seen = {int(members[0])}
        stack = [int(members[0])]
        inside = set(int(m) for m in members)
        while stack:
            v = stack.pop()
            for w in neighbors[v]:
                w = int(w)
                if w in inside and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == members.size

    moved: list[int] = []
    swaps = 0
    while max_swaps is None or swaps < max_swaps:
        best = None
        for p in pack:
            for c in crack:
                in_p = np.flatnonzero(assignment == p)
                in_c = np.flatnonzero(assignment == c)
                border_c = [
                    int(v)
                    for v in in_c
                    if any(assignment[int(w)] == p for w in neighbors[int(v)])
                ]
                border_p = [
                    int(v)
                    for v in in_p
                    if any(assignment[int(w)] == c for w in neighbors[int(v)])
                ]
                for a in border_c:
                    for b in border_p:
                        if a in moved or b in moved:
                            continue
                        gain = share[a] - share[b]
                        if gain <= 0:
                            continue
                        key = (gain, -a, -b)
                        if best is None or key > best[0]:
                            best = (key, a, b, p, c)
        if best is None:
            break
        _, a, b, p, c = best
        trial = assignment.copy()
        trial[a] = p
        trial[b] = c
        if district_ok(p, trial) and district_ok(c, trial):
            assignment = trial
            moved.extend([a, b])
            swaps += 1
        else:
            # the best pair breaks validity; try again without it by marking
            # both precincts as used
            moved.extend([a, b])

    moved_arr = np.array(sorted(set(moved)), dtype=np.int64)
    changed = np.flatnonzero(assignment != base_plan.assignment)
    if changed.size == 0:
        raise FixtureError(
            "no valid pack/crack swap exists for the requested districts"
        )
    plan = Plan(assignment, d, contiguity_verified=True)
    report = validate_plan(pmap, plan, pop_tol)
    if not report.ok:
        raise FixtureError("perturbation broke contiguity or population balance")
    in_perturbed = np.isin(assignment, np.array(pack + crack))
    return PlantedOutlier(
        plan=plan,
        perturbed=np.flatnonzero(in_perturbed),
        moved=np.array(sorted(int(v) for v in changed), dtype=np.int64),
        pack_districts=pack,
        crack_districts=crack,
    )
