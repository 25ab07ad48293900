import math

import numpy as np
import pytest

import ebk
from ebk.errors import EmptySpectrum, UnsafeEndpoint
from ebk.solver import TWO_PI

from oracles import action_integral, morse_level_closed_form

HBAR = 0.1


def test_quantize_harmonic(harmonic_table):
    levels = ebk.quantize_family(harmonic_table, HBAR)
    assert [n for n, _ in levels] == [2, 3, 4, 5, 6, 7]
    for n, e in levels:
        assert e == pytest.approx(HBAR * (n + 0.5), abs=1e-10)


def test_quantize_harmonic_large_hbar(harmonic_table):
    # hbar = 0.5 puts both n=0 (E=0.25) and n=1 (E=0.75) inside [0.2, 0.8].
    levels = ebk.quantize_family(harmonic_table, 0.5)
    assert [(n, round(e, 10)) for n, e in levels] == [(0, 0.25), (1, 0.75)]


def test_quantize_morse_closed_form(morse_table):
    levels = ebk.quantize_family(morse_table, 0.05)
    assert [n for n, _ in levels] == list(range(1, 10))
    for n, e in levels:
        assert e == pytest.approx(morse_level_closed_form(n, 0.05), abs=1e-7)


def test_spectrum_entry_residual(harmonic_table, quartic_table):
    for table, hbar in ((harmonic_table, 0.1), (quartic_table, 0.025)):
        for n, e in ebk.quantize_family(table, hbar):
            resid = abs(float(table.a0_at(e)) - TWO_PI * hbar * (n + 0.5))
            assert resid <= 1e-9 * hbar


def test_convention_equivalence(harmonic_table, quartic_table):
    # A0 = 2*pi*hbar*(n + 1/2) over n and A0 = 2*pi*hbar*(m - 1/2) over m
    # describe the same level set.
    for table in (harmonic_table, quartic_table):
        plus = {round(e, 12) for _, e in ebk.quantize_family(table, HBAR)}
        lo_a, hi_a = table.a0_range
        minus = set()
        m = math.floor(lo_a / (TWO_PI * HBAR) + 0.5)
        while TWO_PI * HBAR * (m - 0.5) <= hi_a + 1e-12:
            a = TWO_PI * HBAR * (m - 0.5)
            if a >= lo_a - 1e-12:
                minus.add(round(ebk.invert_action(table, min(max(a, lo_a), hi_a)), 12))
            m += 1
        assert plus == minus


def test_merged_spectrum_double_well(dw_tables, dw_window):
    bs = ebk.merged_spectrum(dw_tables, 0.05, dw_window)
    by_family = {}
    for entry in bs.entries:
        by_family.setdefault(entry.k, []).append(entry.energy)
    assert set(by_family) == {1, 2}
    a = np.array(by_family[1])
    b = np.array(by_family[2])
    assert a.size == b.size > 0
    assert np.max(np.abs(a - b)) <= 1e-9


def test_merged_spectrum_harmonic_gaps(harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], HBAR, harmonic_window)
    gaps = np.diff(bs.energies())
    assert np.allclose(gaps, HBAR, atol=1e-9)


def test_merged_spectrum_sorted_and_monotone_per_family(quartic_table, quartic_window):
    bs = ebk.merged_spectrum([quartic_table], HBAR, quartic_window)
    energies = bs.energies()
    assert np.all(np.diff(energies) > 0)
    ns = [e.n for e in bs.entries]
    assert ns == sorted(ns)


def test_weyl_analytic_case(harmonic_wide_table):
    table = harmonic_wide_table
    bs = ebk.merged_spectrum([table], HBAR, table.window)
    wc = ebk.exact_weyl_count([table], HBAR, 0.22, 1.01, bs)
    assert wc.count == 8
    assert wc.per_family == (8,)
    assert abs(wc.delta) < 1.0


def test_weyl_unsafe_endpoint(harmonic_wide_table):
    table = harmonic_wide_table
    bs = ebk.merged_spectrum([table], HBAR, table.window)
    with pytest.raises(UnsafeEndpoint):
        ebk.exact_weyl_count([table], HBAR, 0.25, 1.01, bs)
    with pytest.raises(UnsafeEndpoint):
        ebk.exact_weyl_count([table], HBAR, 0.22, 2.0, bs)


def test_weyl_count_matches_spectrum_entries(
    harmonic_table, harmonic_window, dw_tables, dw_window
):
    rng = np.random.default_rng(31)
    for tables, window, hbar in [
        ([harmonic_table], harmonic_window, 0.1),
        (dw_tables, dw_window, 0.05),
    ]:
        bs = ebk.merged_spectrum(tables, hbar, window)
        pairs = ebk.draw_safe_endpoints(rng, tables, bs, window, 10)
        for a, b in pairs:
            wc = ebk.exact_weyl_count(tables, hbar, a, b, bs)
            inside = sum(a <= e.energy <= b for e in bs.entries)
            assert wc.count == inside
            assert sum(wc.per_family) == wc.count


def test_branch_energy_examples(harmonic_table, quartic_table):
    assert ebk.branch_energy(harmonic_table, 3, 0.1) == pytest.approx(0.35, abs=1e-10)
    assert ebk.branch_energy(harmonic_table, 3, 0.05) is None
    a_ref = action_integral(lambda x: x**4, 1.0, -1.5, 1.5)
    e = ebk.branch_energy(quartic_table, 5, 0.1)
    expected = (TWO_PI * 0.1 * 5.5 / a_ref) ** (4.0 / 3.0)
    assert e == pytest.approx(expected, abs=1e-7)


def test_branch_monotonicity(quartic_table):
    energies = [ebk.branch_energy(quartic_table, n, 0.1) for n in range(20)]
    inside = [e for e in energies if e is not None]
    assert len(inside) >= 3
    assert all(b > a for a, b in zip(inside, inside[1:]))
    branch = ebk.Branch(k=1, n=8, table=quartic_table)
    h_lo = branch.exit_hbar() * 1.001
    h_hi = 0.999 * float(quartic_table.a0_at(quartic_table.window.e2)) / (TWO_PI * 8.5)
    hs = np.linspace(h_lo, h_hi, 25)
    vals = [branch.energy(float(h)) for h in hs]
    assert all(v is not None for v in vals)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_branch_exit(harmonic_table):
    for n in (2, 3, 7):
        h_star = ebk.exit_hbar(harmonic_table, n)
        assert h_star == pytest.approx(0.2 / (n + 0.5), abs=1e-10)
        assert ebk.branch_energy(harmonic_table, n, 0.999 * h_star) is None
        assert ebk.branch_energy(harmonic_table, n, 0.5 * h_star) is None
        assert ebk.branch_energy(harmonic_table, n, 1.001 * h_star) is not None


def test_nearest_level(harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], HBAR, harmonic_window)
    e, gap = ebk.nearest_level(bs, 0.30)
    assert gap == pytest.approx(0.05, abs=1e-9)
    assert e in (pytest.approx(0.25, abs=1e-9), pytest.approx(0.35, abs=1e-9))
    e, gap = ebk.nearest_level(bs, 0.35)
    assert e == pytest.approx(0.35, abs=1e-9) and gap <= 1e-9


def test_nearest_level_empty():
    empty = ebk.BsSpectrum(hbar=0.1, window=ebk.EnergyWindow(0.2, 0.8, 0.05), entries=())
    with pytest.raises(EmptySpectrum):
        ebk.nearest_level(empty, 0.5)


def test_doublet_scan_symmetric(dw_tables, dw_window):
    bs = ebk.merged_spectrum(dw_tables, 0.05, dw_window)
    clusters = ebk.doublet_scan(bs, 0.05**2)
    assert len(clusters) == len(bs.entries) // 2
    for c in clusters:
        assert len(c.entries) == 2
        assert c.families == (1, 2)


def test_doublet_scan_harmonic_none(harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], HBAR, harmonic_window)
    assert ebk.doublet_scan(bs, HBAR**2) == []


def test_doublet_scan_asymmetric_well():
    tilted = ebk.schrodinger_symbol(
        ebk.polynomial_potential([1.0, 0.1, -2.0, 0.0, 1.0])
    )
    window = ebk.EnergyWindow(0.25, 0.6, 0.05)
    fams = ebk.build_families(tilted, window)
    assert len(fams) == 2
    tables = [ebk.build_action_table(tilted, f, window, 17) for f in fams]
    bs = ebk.merged_spectrum(tables, 0.05, window)
    assert len(bs) > 0
    assert ebk.doublet_scan(bs, 0.05**2) == []
