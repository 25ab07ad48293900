"""Confrontation of predicted spectra with the direct oracle.

Matching is order preserving: both spectra are sorted and agree level by
level (multiplicity included) up to the two-term truncation error, so the
i-th interior entry pairs with the i-th. Nearest-neighbor pairing would
double-match inside doublet clusters and is deliberately not used.
Interior means one mean spacing away from the window edges, with the
actual cuts placed in gaps of the predicted spectrum so an O(hbar^2)
offset cannot move a level across a cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BijectionFailure, UnsafeEndpoint
from .oracle import EigenResult, OracleRun, count_below, solve_window
from .portrait import build_families
from .solver import BsSpectrum, exact_weyl_count, merged_spectrum, spacing_floor
from .symbols import EnergyWindow, SymbolSpec
from .action import ActionTable, build_action_table

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MatchedPair:
    e_bs: float
    e_oracle: float
    abs_err: float
    k: int
    n: int
    node_count: int | None = None


@dataclass(frozen=True)
class MatchReport:
    pairs: tuple[MatchedPair, ...]
    unmatched_bs: int
    unmatched_oracle: int
    max_err: float
    mean_err: float


def _interior_cuts(bs: BsSpectrum, window: EnergyWindow, tau_min: float):
    """Cut energies one mean spacing inside the window, placed in BS gaps."""
    spacing = TWO_PI * bs.hbar / tau_min
    lo = window.e1 + spacing
    hi = window.e2 - spacing
    energies = bs.energies()
    inside = [e for e in energies if lo <= e <= hi]
    if not inside:
        return None
    below = [e for e in energies if e < lo]
    above = [e for e in energies if e > hi]
    cut_lo = 0.5 * (below[-1] + inside[0]) if below else lo
    cut_hi = 0.5 * (above[0] + inside[-1]) if above else hi
    return cut_lo, cut_hi


def match_spectra(
    bs: BsSpectrum,
    oracle_result: EigenResult,
    window: EnergyWindow,
    tau_min: float,
    *,
    node_counts: dict[int, int] | None = None,
) -> MatchReport:
    """Order-preserving interior matching; raises BijectionFailure on mismatch.

    node_counts optionally maps oracle eigenvalue indices to eigenfunction
    node counts, carried through to the matched pairs.
    """
    cuts = _interior_cuts(bs, window, tau_min)
    ev = oracle_result.eigenvalues
    if cuts is None:
        return MatchReport((), len(bs), len(ev), 0.0, 0.0)
    cut_lo, cut_hi = cuts
    bs_sel = [e for e in bs.entries if cut_lo <= e.energy <= cut_hi]
    or_sel = np.nonzero((ev >= cut_lo) & (ev <= cut_hi))[0]
    if len(bs_sel) != or_sel.size:
        raise BijectionFailure(
            f"interior counts differ: {len(bs_sel)} predicted vs {or_sel.size} oracle "
            f"in [{cut_lo:g}, {cut_hi:g}] at hbar={bs.hbar:g}"
        )
    pairs = []
    for entry, j in zip(bs_sel, or_sel):
        e_or = float(ev[j])
        nodes = None
        if node_counts is not None:
            nodes = node_counts.get(int(oracle_result.indices[j]))
        pairs.append(
            MatchedPair(
                e_bs=entry.energy,
                e_oracle=e_or,
                abs_err=abs(entry.energy - e_or),
                k=entry.k,
                n=entry.n,
                node_count=nodes,
            )
        )
    errs = np.array([p.abs_err for p in pairs]) if pairs else np.zeros(1)
    return MatchReport(
        pairs=tuple(pairs),
        unmatched_bs=len(bs) - len(bs_sel),
        unmatched_oracle=int(ev.size - or_sel.size),
        max_err=float(np.max(errs)),
        mean_err=float(np.mean(errs)),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    hbars: tuple[float, ...]
    max_errs: tuple[float, ...]
    slope: float
    intercept: float
    fit_residual: float
    floor_limited: tuple[bool, ...]


def convergence_study(
    spec: SymbolSpec,
    window: EnergyWindow,
    hbars,
    *,
    action_samples: int = 49,
    trace_tol: float = 1e-10,
    phase_tol: float = 1e-5,
) -> ConvergenceReport:
    """Fit the order of max interior |BS - oracle| against hbar.

    Entries whose error sits within a decade of the oracle's own error
    estimate are flagged floor-limited; the fitted slope is only meaningful
    when no flag is set.
    """
    hbars = [float(h) for h in hbars]
    if len(hbars) < 3:
        raise ValueError("need at least 3 hbar values")
    families = build_families(spec, window, trace_tol=trace_tol)
    tables = [
        build_action_table(spec, fam, window, action_samples, trace_tol=trace_tol)
        for fam in families
    ]
    tau_min = min(t.tau_min for t in tables)
    max_errs = []
    floors = []
    for hbar in hbars:
        bs = merged_spectrum(tables, hbar, window)
        run = solve_window(spec.potential, window, hbar, phase_tol=phase_tol)
        report = match_spectra(bs, run.result, window, tau_min)
        max_errs.append(report.max_err)
        floors.append(report.max_err < 10.0 * run.floor_estimate)
    log_h = np.log(np.array(hbars))
    log_e = np.log(np.maximum(np.array(max_errs), 1e-300))
    coeffs, residuals, *_ = np.polyfit(log_h, log_e, 1, full=True)
    fit_residual = float(residuals[0]) if len(residuals) else 0.0
    return ConvergenceReport(
        hbars=tuple(hbars),
        max_errs=tuple(max_errs),
        slope=float(coeffs[0]),
        intercept=float(coeffs[1]),
        fit_residual=fit_residual,
        floor_limited=tuple(bool(f) for f in floors),
    )


@dataclass(frozen=True)
class WeylCheck:
    e1t: float
    e2t: float
    formula_count: int
    oracle_count: int

    @property
    def ok(self) -> bool:
        return self.formula_count == self.oracle_count


def weyl_check(
    tables: list[ActionTable],
    bs: BsSpectrum,
    oracle_run: OracleRun,
    e1t: float,
    e2t: float,
) -> WeylCheck:
    """Exact formula count against the Sturm count on the fine grid."""
    wc = exact_weyl_count(tables, bs.hbar, e1t, e2t, bs)
    lo, hi = count_below(oracle_run.operator, np.array([e1t, e2t]))
    return WeylCheck(
        e1t=e1t, e2t=e2t, formula_count=wc.count, oracle_count=int(hi - lo)
    )


def verify_weyl(
    spec: SymbolSpec,
    window: EnergyWindow,
    hbar: float,
    endpoints: tuple[float, float],
    *,
    context: tuple[list[ActionTable], BsSpectrum, OracleRun] | None = None,
) -> bool:
    """True iff the counting formula reproduces the oracle count exactly."""
    if context is None:
        families = build_families(spec, window)
        tables = [build_action_table(spec, fam, window) for fam in families]
        bs = merged_spectrum(tables, hbar, window)
        run = solve_window(spec.potential, window, hbar)
        context = (tables, bs, run)
    tables, bs, run = context
    return weyl_check(tables, bs, run, endpoints[0], endpoints[1]).ok


def draw_safe_endpoints(
    rng: np.random.Generator,
    tables: list[ActionTable],
    bs: BsSpectrum,
    window: EnergyWindow,
    n_pairs: int,
    *,
    safety: float = 0.3,
    max_tries: int = 10_000,
) -> list[tuple[float, float]]:
    """Seeded endpoint pairs keeping a safe distance from the spectrum.

    Raises UnsafeEndpoint when the merged spectrum is so dense relative to
    the per-family spacing floor that safe pairs are (almost) nowhere to be
    found; lowering the safety factor is then the caller's call.
    """
    floor = safety * spacing_floor(tables, bs.hbar)
    energies = bs.energies()
    pairs = []
    tries = 0
    while len(pairs) < n_pairs:
        tries += 1
        if tries > max_tries:
            raise UnsafeEndpoint(
                f"found only {len(pairs)}/{n_pairs} safe endpoint pairs in "
                f"{max_tries} draws; spectrum too dense for safety {safety:g}"
            )
        e1t, e2t = np.sort(rng.uniform(window.e1, window.e2, size=2))
        if e2t - e1t < 2.0 * floor:
            continue
        if energies.size and (
            np.min(np.abs(energies - e1t)) < 1.05 * floor
            or np.min(np.abs(energies - e2t)) < 1.05 * floor
        ):
            continue
        pairs.append((float(e1t), float(e2t)))
    return pairs
