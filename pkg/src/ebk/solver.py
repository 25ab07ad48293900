"""Quantization condition, merged spectra, exact counting, branches, doublets.

Per family the quantization condition is A0(E) = 2*pi*hbar*(n + 1/2) with
integer n; the half shift is the Maslov contribution mu/4 with |mu| = 2.
The set of solutions is unchanged if the shift is moved to the other sign
convention (n runs over all integers), which is covered by a property test
rather than solver logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .action import ActionTable, invert_action
from .errors import EmptySpectrum, OutOfWindow, UnsafeEndpoint
from .symbols import EnergyWindow

TWO_PI = 2.0 * math.pi
# Slack on boundary comparisons so knife-edge float ties do not flip
# inclusion decisions that are exact in real arithmetic. Kept below the
# 1e-9*hbar residual bound that spectrum entries must satisfy.
_EDGE_SLACK = 5e-10


@dataclass(frozen=True)
class SpectrumEntry:
    energy: float
    k: int
    n: int


@dataclass(frozen=True)
class BsSpectrum:
    """Labeled quantization solutions in the window, sorted by energy."""

    hbar: float
    window: EnergyWindow
    entries: tuple[SpectrumEntry, ...]

    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)


def quantize_family(
    table: ActionTable, hbar: float, window: EnergyWindow | None = None
) -> list[tuple[int, float]]:
    """All (n, E) with A0(E) = 2*pi*hbar*(n + 1/2) and E in the window."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    window = window or table.window
    lo_a = float(table.a0_at(window.e1))
    hi_a = float(table.a0_at(window.e2))
    step = TWO_PI * hbar
    tol = _EDGE_SLACK * hbar
    n_min = math.ceil((lo_a - tol) / step - 0.5)
    n_max = math.floor((hi_a + tol) / step - 0.5)
    out = []
    for n in range(n_min, n_max + 1):
        a = step * (n + 0.5)
        e = invert_action(table, min(max(a, lo_a), hi_a))
        out.append((n, min(max(e, window.e1), window.e2)))
    return out


def merged_spectrum(
    tables: list[ActionTable], hbar: float, window: EnergyWindow
) -> BsSpectrum:
    """Disjoint union over families, globally sorted, labels retained."""
    entries = []
    for table in tables:
        for n, e in quantize_family(table, hbar, window):
            entries.append(SpectrumEntry(energy=e, k=table.k, n=n))
    entries.sort(key=lambda s: (s.energy, s.k, s.n))
    return BsSpectrum(hbar=hbar, window=window, entries=tuple(entries))


@dataclass(frozen=True)
class WeylCount:
    """Exact per-family counts with the two-term asymptotic for reference."""

    count: int
    per_family: tuple[int, ...]
    leading: float
    correction: float
    delta: float


def spacing_floor(tables: list[ActionTable], hbar: float) -> float:
    """Smallest mean level spacing over the families, 2*pi*hbar/tau_max."""
    tau_max = max(t.tau_max for t in tables)
    return TWO_PI * hbar / tau_max


def endpoint_is_safe(
    tables: list[ActionTable],
    bs: BsSpectrum,
    endpoint: float,
    *,
    safety: float = 0.3,
) -> bool:
    """Distance to the predicted spectrum at least safety * min mean spacing."""
    if not bs.entries:
        return True
    dist = float(np.min(np.abs(bs.energies() - endpoint)))
    return dist >= safety * spacing_floor(tables, bs.hbar) * (1.0 - _EDGE_SLACK)


def exact_weyl_count(
    tables: list[ActionTable],
    hbar: float,
    e1t: float,
    e2t: float,
    bs: BsSpectrum,
    *,
    safety: float = 0.3,
) -> WeylCount:
    """Integer-exact count of quantization solutions in [e1t, e2t].

    Per family N_k = floor(A0(e2t)/(2 pi hbar) + 1/2)
                   - floor(A0(e1t)/(2 pi hbar) + 1/2),
    valid when both endpoints keep a safe distance from the spectrum.
    """
    if not e1t < e2t:
        raise ValueError("need e1t < e2t")
    for endpoint in (e1t, e2t):
        if not (bs.window.e1 <= endpoint <= bs.window.e2):
            raise UnsafeEndpoint(f"endpoint {endpoint:g} outside the window")
        if not endpoint_is_safe(tables, bs, endpoint, safety=safety):
            raise UnsafeEndpoint(
                f"endpoint {endpoint:g} is within {safety:g} mean spacings of the spectrum"
            )
    step = TWO_PI * hbar
    per_family = []
    leading = 0.0
    correction = 0.0
    for table in tables:
        a1 = float(table.a0_at(e1t))
        a2 = float(table.a0_at(e2t))
        per_family.append(math.floor(a2 / step + 0.5) - math.floor(a1 / step + 0.5))
        leading += (a2 - a1) / step
        correction += (float(table.tau_at(e2t)) - float(table.tau_at(e1t))) / TWO_PI
    total = int(sum(per_family))
    return WeylCount(
        count=total,
        per_family=tuple(per_family),
        leading=leading,
        correction=correction,
        delta=total - leading - correction,
    )


def branch_energy(table: ActionTable, n: int, hbar: float) -> float | None:
    """Energy of branch (k, n) at this hbar, or None once it left the window."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    try:
        return invert_action(table, TWO_PI * hbar * (n + 0.5))
    except OutOfWindow:
        return None


def exit_hbar(table: ActionTable, n: int) -> float:
    """Largest hbar at which branch n sits on the lower window edge.

    Every branch leaves through e1 as hbar decreases because A0 is positive
    and bounded below on the window.
    """
    return float(table.a0_at(table.window.e1)) / (TWO_PI * (n + 0.5))


@dataclass(frozen=True)
class Branch:
    """One hbar-smooth eigenvalue branch, labeled by family and quantum number."""

    k: int
    n: int
    table: ActionTable = field(repr=False)

    def energy(self, hbar: float) -> float | None:
        return branch_energy(self.table, self.n, hbar)

    def exit_hbar(self) -> float:
        return exit_hbar(self.table, self.n)


def nearest_level(bs: BsSpectrum, e0: float) -> tuple[float, float]:
    """Closest predicted level to e0 and its distance."""
    if not bs.entries:
        raise EmptySpectrum("no levels in the window")
    energies = bs.energies()
    i = int(np.argmin(np.abs(energies - e0)))
    return float(energies[i]), float(abs(energies[i] - e0))


@dataclass(frozen=True)
class DoubletCluster:
    center: float
    entries: tuple[SpectrumEntry, ...]
    families: tuple[int, ...]


def doublet_scan(bs: BsSpectrum, radius: float) -> list[DoubletCluster]:
    """Clusters of levels within radius holding at least two distinct families."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    clusters = []
    group: list[SpectrumEntry] = []
    for entry in bs.entries:
        if group and entry.energy - group[-1].energy > radius:
            clusters.append(group)
            group = []
        group.append(entry)
    if group:
        clusters.append(group)
    out = []
    for group in clusters:
        families = sorted({e.k for e in group})
        if len(group) >= 2 and len(families) >= 2:
            center = sum(e.energy for e in group) / len(group)
            out.append(
                DoubletCluster(
                    center=center, entries=tuple(group), families=tuple(families)
                )
            )
    return out
