import numpy as np
import pytest

import ebk
from ebk.errors import BijectionFailure
from ebk.oracle import EigenResult


def test_match_harmonic(harmonic, harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], 0.1, harmonic_window)
    run = ebk.solve_window(harmonic.potential, harmonic_window, 0.1)
    rep = ebk.match_spectra(bs, run.result, harmonic_window, harmonic_table.tau_min)
    assert len(rep.pairs) >= 4
    assert rep.max_err <= 1e-5
    for p in rep.pairs:
        assert p.abs_err == abs(p.e_bs - p.e_oracle)


def test_match_carries_node_counts(harmonic, harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], 0.1, harmonic_window)
    run = ebk.solve_window(harmonic.potential, harmonic_window, 0.1)
    nodes = {
        int(i): ebk.node_count(ebk.eigenvector(run.operator, float(e)))
        for e, i in zip(run.result.eigenvalues, run.result.indices)
    }
    rep = ebk.match_spectra(
        bs, run.result, harmonic_window, harmonic_table.tau_min, node_counts=nodes
    )
    assert all(p.node_count == p.n for p in rep.pairs)


def test_match_detects_missing_interior_level(harmonic, harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], 0.1, harmonic_window)
    run = ebk.solve_window(harmonic.potential, harmonic_window, 0.1)
    ev = run.result.eigenvalues
    broken = EigenResult(
        eigenvalues=np.delete(ev, 3), indices=np.delete(run.result.indices, 3)
    )
    with pytest.raises(BijectionFailure):
        ebk.match_spectra(bs, broken, harmonic_window, harmonic_table.tau_min)


def test_match_double_well_doublet_pairs(double_well, dw_tables, dw_window):
    bs = ebk.merged_spectrum(dw_tables, 0.05, dw_window)
    run = ebk.solve_window(double_well.potential, dw_window, 0.05)
    tau_min = min(t.tau_min for t in dw_tables)
    rep = ebk.match_spectra(bs, run.result, dw_window, tau_min)
    assert len(rep.pairs) >= 2 and len(rep.pairs) % 2 == 0
    assert rep.max_err <= 1e-3  # two-term truncation error at hbar = 0.05


def test_convergence_needs_three_hbars(harmonic, harmonic_window):
    with pytest.raises(ValueError):
        ebk.convergence_study(harmonic, harmonic_window, [0.2, 0.1])


def test_convergence_floor_flag_harmonic(harmonic, harmonic_window):
    rep = ebk.convergence_study(
        harmonic, harmonic_window, [0.2, 0.1, 0.05], action_samples=17
    )
    assert all(rep.floor_limited)


def test_convergence_floor_flag_morse(morse, morse_window):
    rep = ebk.convergence_study(
        morse, morse_window, [0.2, 0.1, 0.05], action_samples=33
    )
    assert all(rep.floor_limited)
    assert max(rep.max_errs) <= 1e-6


def test_verify_weyl_analytic(harmonic, harmonic_wide_table):
    table = harmonic_wide_table
    window = table.window
    bs = ebk.merged_spectrum([table], 0.1, window)
    run = ebk.solve_window(harmonic.potential, window, 0.1)
    assert ebk.verify_weyl(
        harmonic, window, 0.1, (0.22, 1.01), context=([table], bs, run)
    )
    chk = ebk.weyl_check([table], bs, run, 0.22, 1.01)
    assert chk.formula_count == chk.oracle_count == 8


def test_draw_safe_endpoints_respects_floor(harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], 0.1, harmonic_window)
    rng = np.random.default_rng(5)
    pairs = ebk.draw_safe_endpoints(rng, [harmonic_table], bs, harmonic_window, 10)
    energies = bs.energies()
    floor = 0.3 * 2 * np.pi * 0.1 / harmonic_table.tau_max
    for a, b in pairs:
        assert a < b
        assert np.min(np.abs(energies - a)) >= floor
        assert np.min(np.abs(energies - b)) >= floor


def test_draw_safe_endpoints_deterministic(harmonic_table, harmonic_window):
    bs = ebk.merged_spectrum([harmonic_table], 0.1, harmonic_window)
    p1 = ebk.draw_safe_endpoints(
        np.random.default_rng(11), [harmonic_table], bs, harmonic_window, 5
    )
    p2 = ebk.draw_safe_endpoints(
        np.random.default_rng(11), [harmonic_table], bs, harmonic_window, 5
    )
    assert p1 == p2
