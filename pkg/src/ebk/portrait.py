"""Level-set extraction by Hamiltonian flow tracing.

The connected components of {H = E} are found in two stages. A marching
pass over a grid of H values yields one candidate point per closed contour
loop, refined onto the level set by bisection along a grid edge. Each
candidate then seeds an integration of the flow

    x' = dH/dxi,   xi' = -dH/dx,

which traces the component, detects the first return through a section
normal to the flow at the seed, and accumulates the loop action integral
of xi dx along the way. Period, action and the sample polyline therefore
come from a single adaptive integration.

Component counting near a topology change never relies on tracing (a trace
started on a critical level would stall), only on the marching pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import integrate
from .errors import (
    EmptyLevelSet,
    NonConstantTopology,
    NotClosedOrbit,
    PreimageNotEnclosed,
    TraceDiverged,
)
from .symbols import Box, EnergyWindow, SymbolSpec, compact_preimage_box

DEFAULT_TRACE_TOL = 1e-10
DEFAULT_MAX_TIME = 1e4
DEFAULT_POINTS = 4096
_MIN_GRAD = 1e-8
# Local integration error per step, well under the trace tolerance so the
# accumulated drift over one period stays within it.
_LOCAL_TOL_FACTOR = 1e-3


@dataclass(frozen=True)
class LevelComponent:
    """One closed oriented component of {H = E}, sampled along the flow.

    points are approximately equispaced in flow time over one period and do
    not repeat the initial point at t = period. orientation +1 means the
    stored order follows the Hamiltonian flow; action is the loop integral
    of xi dx in the stored orientation.
    """

    energy: float
    points: np.ndarray  # (n, 2) columns x, xi
    times: np.ndarray
    period: float
    seed: tuple[float, float]
    orientation: int
    action: float
    trace_tol: float
    closure_gap: float = 0.0  # |flow(seed, period) - seed|, already <= trace_tol

    def reversed(self) -> "LevelComponent":
        pts = self.points[::-1].copy()
        pts = np.roll(pts, 1, axis=0)  # keep the seed sample first
        return replace(
            self,
            points=pts,
            orientation=-self.orientation,
            action=-self.action,
        )


@dataclass(frozen=True)
class ComponentFamily:
    """A level-set component followed continuously across the window."""

    k: int
    energies: np.ndarray
    seeds: np.ndarray  # (n, 2), one representative per sampled energy

    def seed_near(self, energy: float) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.energies - energy)))
        return float(self.seeds[i, 0]), float(self.seeds[i, 1])


def _grid_values(spec, box: Box, n: int):
    xs = np.linspace(box.x_lo, box.x_hi, n)
    xis = np.linspace(box.xi_lo, box.xi_hi, n)
    H = np.asarray(
        spec.value(xs[:, None], xis[None, :]), dtype=float
    )
    return xs, xis, H


def _marching_loops(spec, energy, box, grid_n):
    """Closed contour loops of {H = E} on the grid.

    Returns a list of loops, each an ordered list of edge-crossing points.
    Edges are grid segments; axis 0 crossings vary x, axis 1 vary xi. An
    open chain means the contour leaves the box.
    """
    xs, xis, H = _grid_values(spec, box, grid_n)
    F = H - energy
    pos = F > 0.0

    crossings = {}

    def _edge_point(i, j, axis):
        if axis == 0:
            t = F[i, j] / (F[i, j] - F[i + 1, j])
            return (xs[i] + t * (xs[i + 1] - xs[i]), xis[j])
        t = F[i, j] / (F[i, j] - F[i, j + 1])
        return (xs[i], xis[j] + t * (xis[j + 1] - xis[j]))

    cross_x = pos[:-1, :] != pos[1:, :]
    cross_xi = pos[:, :-1] != pos[:, 1:]
    for i, j in zip(*np.nonzero(cross_x)):
        crossings[(int(i), int(j), 0)] = _edge_point(int(i), int(j), 0)
    for i, j in zip(*np.nonzero(cross_xi)):
        crossings[(int(i), int(j), 1)] = _edge_point(int(i), int(j), 1)
    if not crossings:
        raise EmptyLevelSet(f"no crossing of level {energy:g} on the grid")

    # Cell adjacency: pair up the crossed edges of every touched cell.
    links = {key: [] for key in crossings}
    n = grid_n
    cells = set()
    for (i, j, axis) in crossings:
        if axis == 0:  # x-edge: bottom of cell (i, j), top of cell (i, j-1)
            if j < n - 1:
                cells.add((i, j))
            if j > 0:
                cells.add((i, j - 1))
        else:  # xi-edge: left of cell (i, j), right of cell (i-1, j)
            if i < n - 1:
                cells.add((i, j))
            if i > 0:
                cells.add((i - 1, j))
    for ci, cj in sorted(cells):
        cell_edges = []
        for key in (
            (ci, cj, 0),
            (ci, cj + 1, 0),
            (ci, cj, 1),
            (ci + 1, cj, 1),
        ):
            if key in crossings:
                cell_edges.append(key)
        if len(cell_edges) == 2:
            a, b = cell_edges
            links[a].append(b)
            links[b].append(a)
        elif len(cell_edges) == 4:
            # Saddle cell: use the center sample to pick the pairing.
            cx = 0.5 * (xs[ci] + xs[ci + 1])
            cxi = 0.5 * (xis[cj] + xis[cj + 1])
            center_pos = float(spec.value(cx, cxi)) - energy > 0.0
            b0, b1 = (ci, cj, 0), (ci, cj + 1, 0)
            l0, r0 = (ci, cj, 1), (ci + 1, cj, 1)
            corner_pos = pos[ci, cj]
            if center_pos == corner_pos:
                pairs = ((b0, r0), (b1, l0))
            else:
                pairs = ((b0, l0), (b1, r0))
            for a, b in pairs:
                links[a].append(b)
                links[b].append(a)
        # 1 or 3 edges: contour touches a grid node; the loop walk below
        # will surface it as an open chain if it matters.

    loops = []
    unvisited = set(crossings)
    while unvisited:
        start = min(unvisited)  # deterministic order
        chain = [start]
        unvisited.discard(start)
        prev = None
        cur = start
        closed = False
        while True:
            nxts = [e for e in links[cur] if e != prev]
            if not nxts:
                break
            nxt = nxts[0]
            if nxt == start:
                closed = True
                break
            if nxt not in unvisited:
                break
            chain.append(nxt)
            unvisited.discard(nxt)
            prev, cur = cur, nxt
        if not closed and len(links[start]) < 2:
            raise PreimageNotEnclosed(
                "open contour chain: the level set leaves the box"
            )
        loops.append([crossings[key] for key in chain])
    return loops


def marching_component_count(
    spec: SymbolSpec, energy: float, box: Box, grid_n: int = 201
) -> int:
    """Number of closed contour loops on the grid; no flow integration."""
    return len(_marching_loops(spec, energy, box, grid_n))


def refine_to_level(spec, point, energy, tol=1e-12, max_iter=80):
    """Move a point onto {H = E} along the gradient direction."""
    x, xi = float(point[0]), float(point[1])
    for _ in range(max_iter):
        h = float(spec.value(x, xi)) - energy
        if abs(h) <= tol:
            return x, xi
        gx, gxi = spec.gradient(x, xi)
        gx, gxi = float(gx), float(gxi)
        n2 = gx * gx + gxi * gxi
        if n2 < _MIN_GRAD**2:
            raise EmptyLevelSet("refinement stalled at a near-critical point")
        x -= h * gx / n2
        xi -= h * gxi / n2
    raise EmptyLevelSet(f"could not refine seed onto level {energy:g}")


def trace_component(
    spec: SymbolSpec,
    seed: tuple[float, float],
    energy: float,
    trace_tol: float = DEFAULT_TRACE_TOL,
    *,
    max_time: float = DEFAULT_MAX_TIME,
    n_points: int = DEFAULT_POINTS,
) -> LevelComponent:
    """Trace the closed flow orbit through seed on {H = E}.

    The first return is detected on the section through the seed normal to
    the flow, accepting only crossings in the flow direction that land back
    at the seed within trace_tol; the return time is refined by bisection on
    the dense output to 1e-13. Raises NotClosedOrbit if no return occurs
    before max_time and TraceDiverged if sampled energies drift.
    """
    sx, sxi = float(seed[0]), float(seed[1])
    gx, gxi = spec.gradient(sx, sxi)
    gx, gxi = float(gx), float(gxi)
    speed = math.hypot(gxi, gx)
    if speed <= _MIN_GRAD:
        raise ValueError("seed gradient too small; refusing to trace near a critical point")
    nvec = (gxi / speed, -gx / speed)  # flow direction at the seed

    def rhs(y):
        dx, dxi = spec.gradient(y[0], y[1])
        dx, dxi = float(dx), float(dxi)
        return np.array([dxi, -dx, y[1] * dxi])

    def section(p):
        return nvec[0] * (p[0] - sx) + nvec[1] * (p[1] - sxi)

    y0 = np.array([sx, sxi, 0.0])
    local_tol = trace_tol * _LOCAL_TOL_FACTOR
    steps: list[integrate.Step] = []
    g_prev = 0.0
    period = None
    y_ret = None
    step_iter = integrate.dp45_steps(rhs, y0, local_tol, max_time)
    while True:
        try:
            step = next(step_iter)
        except StopIteration:
            break
        except RuntimeError as exc:  # step-size underflow inside the stepper
            raise TraceDiverged(str(exc)) from exc
        steps.append(step)
        g_new = section(step.y1)
        if g_prev < 0.0 <= g_new:
            lo, hi = step.t0, step.t0 + step.h
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                if section(step.eval(mid)) < 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-13:
                    break
            t_star = 0.5 * (lo + hi)
            y_star = step.eval(t_star)
            if math.hypot(y_star[0] - sx, y_star[1] - sxi) <= trace_tol:
                period = t_star
                y_ret = y_star
                break
        g_prev = g_new
    if period is None:
        raise NotClosedOrbit(
            f"no return to the section within t = {max_time:g} from seed ({sx:g}, {sxi:g})"
        )

    ts = np.linspace(0.0, period, n_points, endpoint=False)
    samples = integrate.resample(steps, ts)
    points = samples[:, :2]
    drift = np.abs(
        np.asarray(spec.value(points[:, 0], points[:, 1]), dtype=float) - energy
    )
    if float(np.max(drift)) > trace_tol:
        raise TraceDiverged(
            f"energy drift {float(np.max(drift)):.3e} exceeds {trace_tol:g}"
        )
    return LevelComponent(
        energy=energy,
        points=points,
        times=ts,
        period=float(period),
        seed=(sx, sxi),
        orientation=+1,
        action=float(y_ret[2]),
        trace_tol=trace_tol,
        closure_gap=float(math.hypot(y_ret[0] - sx, y_ret[1] - sxi)),
    )


def _components_at(spec, energy, box, grid_n, trace_tol, n_points=DEFAULT_POINTS):
    """All components of {H = E} in the box, traced and deduplicated."""
    loops = _marching_loops(spec, energy, box, grid_n)
    candidates = [refine_to_level(spec, loop[0], energy) for loop in loops]
    components: list[LevelComponent] = []
    covered = [False] * len(candidates)
    for i, cand in enumerate(candidates):
        if covered[i]:
            continue
        comp = trace_component(
            spec, cand, energy, trace_tol, n_points=n_points
        )
        components.append(comp)
        chords = np.linalg.norm(np.diff(comp.points, axis=0, append=comp.points[:1]), axis=1)
        merge_dist = max(3.0 * float(np.max(chords)), 1e-9)
        for j in range(i, len(candidates)):
            d = float(
                np.min(np.linalg.norm(comp.points - np.asarray(candidates[j]), axis=1))
            )
            if d <= merge_dist:
                covered[j] = True
    return components


def seed_components(
    spec: SymbolSpec,
    energy: float,
    box: Box,
    grid_n: int = 201,
    *,
    trace_tol: float = DEFAULT_TRACE_TOL,
) -> list[tuple[float, float]]:
    """One refined seed per connected component of {H = E} in the box.

    Candidates come from grid-edge sign changes refined to |H - E| <= 1e-12;
    two candidates are merged when the trace from one passes within the
    polyline resolution of the other.
    """
    comps = _components_at(spec, energy, box, grid_n, trace_tol, n_points=1024)
    return [c.seed for c in comps]


def component_count(
    spec: SymbolSpec, energy: float, box: Box, grid_n: int = 201
) -> int:
    """Number of deduplicated traced components of {H = E}."""
    return len(_components_at(spec, energy, box, grid_n, DEFAULT_TRACE_TOL, n_points=1024))


def build_families(
    spec: SymbolSpec,
    window: EnergyWindow,
    n_samples: int = 25,
    *,
    grid_n: int = 201,
    trace_tol: float = DEFAULT_TRACE_TOL,
) -> list[ComponentFamily]:
    """Follow each component across the window; labels are stable in energy.

    The component count is taken on every sampled energy by the marching
    pass first; any variation raises NonConstantTopology (a critical value
    sits inside the window, violating the regular-window hypothesis).
    """
    families, _ = families_with_components(
        spec, window, n_samples, grid_n=grid_n, trace_tol=trace_tol
    )
    return families


def families_with_components(
    spec: SymbolSpec,
    window: EnergyWindow,
    n_samples: int = 25,
    *,
    grid_n: int = 201,
    trace_tol: float = DEFAULT_TRACE_TOL,
    n_points: int = DEFAULT_POINTS,
):
    """build_families plus the traced components, grouped per family."""
    box = compact_preimage_box(spec, window)
    energies = np.linspace(window.e1, window.e2, n_samples)
    counts = [marching_component_count(spec, e, box, grid_n) for e in energies]
    if len(set(counts)) != 1:
        raise NonConstantTopology(
            f"component count varies over the window: {sorted(set(counts))}"
        )
    d = counts[0]
    if d == 0:
        raise EmptyLevelSet("window contains no level-set components")

    per_energy = [
        _components_at(spec, e, box, grid_n, trace_tol, n_points=n_points)
        for e in energies
    ]
    if any(len(comps) != d for comps in per_energy):
        raise NonConstantTopology("traced component count disagrees with the grid scan")

    # Initial labels: order by leftmost point. Continuation: nearest polyline.
    order = np.argsort([float(np.min(c.points[:, 0])) for c in per_energy[0]])
    tracks = [[per_energy[0][j]] for j in order]
    for comps in per_energy[1:]:
        taken = [False] * d
        for track in tracks:
            prev = track[-1]
            seed_prev = np.asarray(prev.seed)
            dists = [
                np.inf
                if taken[j]
                else float(np.min(np.linalg.norm(comps[j].points - seed_prev, axis=1)))
                for j in range(d)
            ]
            j = int(np.argmin(dists))
            taken[j] = True
            track.append(comps[j])
    families = []
    comps_by_family = []
    for k, track in enumerate(tracks, start=1):
        seeds = np.array([c.seed for c in track])
        families.append(ComponentFamily(k=k, energies=energies.copy(), seeds=seeds))
        comps_by_family.append(track)
    return families, comps_by_family
