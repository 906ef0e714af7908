"""
Tests for counterexample plans and the martingales built from them
Exact checks run at small resolutions; the blow-up sweeps use float mode
"""

import json
from fractions import Fraction
from pathlib import Path

import pytest

from dyadika.models import AlphaRule, PhiRule, PlanConfig, Regime, ScalarMode
from dyadika.services.counterexamples import (
    PlanValidationError,
    SequencePlan,
    alpha_family,
    block_atom,
    blowup_sweep,
    build_martingale,
    decomposition_check,
    final_display_bound,
    load_plan,
    modulus_certificates,
    pow2,
    rational_sqrt,
    select_alphas,
    shifted_kernel_gap,
    spectrum_check,
    tail_kernel_mass,
    tail_mass_sweep,
)
from dyadika.services.dyadic_domain import ResolutionError
from dyadika.services.hardy import DyadicMartingale, certify_atom
from dyadika.services.index_math import index_stats

PLAN_DIR = Path(__file__).parent.parent / 'plans'
HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


def t3b_plan(resolution=8):
    return SequencePlan(Regime.T3B, HALF, (3, 85), (Fraction(1), Fraction(1)), resolution)


def t4b_plan(resolution=6):
    return SequencePlan(Regime.T4B, QUARTER, (3, 5, 17), (Fraction(1),) * 3, resolution, report_from=2)


def t1b_plan(resolution=6):
    config = PlanConfig(regime='T1b', p='1/2', alphas=[5, 21], phi_rule='variation', resolution=resolution)
    return SequencePlan.from_config(config)


class TestRationalHelpers:
    """Exact powers and roots"""

    def test_pow2(self):
        assert pow2(Fraction(3)) == 8
        assert pow2(Fraction(-2)) == Fraction(1, 4)
        assert float(pow2(HALF)) == pytest.approx(2 ** 0.5, rel=1e-12)

    def test_rational_sqrt(self):
        assert rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
        assert float(rational_sqrt(Fraction(6))) == pytest.approx(6 ** 0.5, rel=1e-12)


class TestSequenceSelection:
    """Index families and greedy selection"""

    def test_families(self):
        assert [alpha_family(AlphaRule.ALTERNATING, j) for j in range(4)] == [1, 5, 21, 85]
        assert alpha_family(AlphaRule.POWER_PLUS_ONE, 3) == 9

    def test_alternating_selection(self):
        alphas = select_alphas(AlphaRule.ALTERNATING, Regime.T1B, HALF, 14, start=1, count=6,
                               budget=8, phi_rule=PhiRule.VARIATION)
        assert alphas == [5, 21, 85, 341, 1365, 5461]

    def test_growth_condition_skips_indices(self):
        alphas = select_alphas(AlphaRule.POWER_PLUS_ONE, Regime.T4B, QUARTER, 14, start=1, count=4)
        assert alphas == [3, 5, 17, 257]

    def test_selection_stops_at_resolution(self):
        alphas = select_alphas(AlphaRule.ALTERNATING, Regime.T1B, HALF, 6, phi_rule=PhiRule.VARIATION)
        assert alphas == [5, 21]

    def test_tabulated_phi_needs_explicit_alphas(self):
        with pytest.raises(PlanValidationError):
            select_alphas(AlphaRule.ALTERNATING, Regime.T1B, HALF, 10, phi_rule=PhiRule.TABLE)


class TestPlans:
    """Plan validation and the shipped plan files"""

    def test_shipped_plans(self):
        assert load_plan(PLAN_DIR / 't1b.json').alphas == (5, 21, 85, 341, 1365, 5461)
        assert load_plan(PLAN_DIR / 't2b.json').alphas == tuple((1 << m) + 1 for m in range(2, 13))
        assert load_plan(PLAN_DIR / 't3b.json').alphas == (5, 70997)
        assert load_plan(PLAN_DIR / 't4b.json').alphas == (3, 5, 17, 257)
        names = ('t1b.json', 't2b.json', 't3b.json', 't4b.json')
        assert [load_plan(PLAN_DIR / name).report_from for name in names] == [1, 2, 1, 2]

    def test_t1b_weights_follow_variation(self):
        plan = load_plan(PLAN_DIR / 't1b.json')
        assert plan.phis[:2] == (Fraction(4), Fraction(6))
        assert plan.weight(1) == HALF
        assert plan.budget_total() <= 8

    @pytest.mark.parametrize("regime,p,alphas", [
        (Regime.T3B, HALF, (85, 3)),
        (Regime.T3B, HALF, (5, 9)),
        (Regime.T1B, QUARTER, (5, 21)),
        (Regime.T4B, HALF, (3, 5)),
        (Regime.T4B, QUARTER, (5, 9)),
    ])
    def test_invalid_plans(self, regime, p, alphas):
        with pytest.raises(PlanValidationError):
            SequencePlan(regime, p, alphas, (Fraction(1),) * len(alphas), 12)

    def test_resolution_too_small(self):
        with pytest.raises(PlanValidationError):
            t3b_plan(resolution=6)

    def test_decreasing_phi(self):
        with pytest.raises(PlanValidationError):
            SequencePlan(Regime.T3B, HALF, (3, 85), (Fraction(2), Fraction(1)), 8)

    def test_budget(self):
        config = PlanConfig(regime='T1b', p='1/2', alphas=[5, 21, 85], phi_rule='variation',
                            resolution=8, budget=1.0)
        with pytest.raises(PlanValidationError):
            SequencePlan.from_config(config)

    def test_plan_needs_alphas_or_rule(self):
        with pytest.raises(PlanValidationError):
            SequencePlan.from_config(PlanConfig(regime='T3b'))

    def test_malformed_plan_files(self, tmp_path):
        broken = tmp_path / 'broken.json'
        broken.write_text('{"regime": ')
        with pytest.raises(ValueError):
            load_plan(broken)
        unknown = tmp_path / 'unknown.json'
        unknown.write_text(json.dumps({'regime': 'T9', 'alphas': [3]}))
        with pytest.raises(ValueError):
            load_plan(unknown)
        with pytest.raises(PlanValidationError):
            load_plan(tmp_path / 'missing.json')


class TestBuild:
    """Block atoms, spectra and the decomposition identities"""

    @pytest.mark.parametrize("alpha,p", [(3, HALF), (5, QUARTER), (21, Fraction(1, 3))])
    def test_block_atoms_certify(self, alpha, p):
        atom = block_atom(alpha, p, 8)
        certificate = certify_atom(atom.f, atom.support, p)
        assert certificate.passed
        assert certificate.sup_tight

    def test_block_atom_needs_room(self):
        with pytest.raises(ResolutionError):
            block_atom(85, HALF, 6)

    def test_truncation_below_top_bit(self):
        with pytest.raises(PlanValidationError):
            build_martingale(t3b_plan(), A=5)

    @pytest.mark.parametrize("make_plan", [t1b_plan, t3b_plan, t4b_plan])
    def test_spectrum_is_exact(self, make_plan):
        plan = make_plan()
        rows, zero_off = spectrum_check(plan, build_martingale(plan))
        assert zero_off
        assert all(row.passed for row in rows)
        assert all(row.measured_min == row.measured_max for row in rows)

    def test_t4b_closed_form(self):
        plan = t4b_plan()
        assert [plan.block_coefficient(k) for k in (1, 2, 3)] == [2, 4, 16]

    @pytest.mark.parametrize("make_plan", [t1b_plan, t3b_plan, t4b_plan])
    def test_decomposition_is_exact(self, make_plan):
        plan = make_plan()
        F = build_martingale(plan)
        for k in range(1, len(plan.alphas) + 1):
            report = decomposition_check(plan, k, F)
            assert report.passed
            assert report.residual == 0
            assert report.shift_gap == 0

    def test_decomposition_terms(self):
        assert set(decomposition_check(t1b_plan(), 2).terms) == {'smoothed', 'projected', 'kernel'}
        assert set(decomposition_check(t3b_plan(), 1).terms) == {'smoothed', 'projected', 'kernel'}

    def test_float_decomposition(self):
        plan = t3b_plan()
        assert decomposition_check(plan, 2, mode=ScalarMode.FLOAT).passed

    @pytest.mark.parametrize("top,n", [(2, 3), (4, 5), (5, 21)])
    def test_shifted_kernel(self, top, n):
        assert shifted_kernel_gap(top, n, 7) == 0


class TestBlowup:
    """Measured quasi-norms against the predicted growth"""

    def test_t3b_rows_must_grow(self):
        report = blowup_sweep(t3b_plan())
        assert [row.k for row in report.rows] == [1, 2]
        assert all(row.measured > 0 for row in report.rows)
        # a second block of small variation lowers the second row below the first
        assert not report.monotone
        assert not report.passed

    def test_t4b_final_display(self):
        plan = load_plan(PLAN_DIR / 't4b.json')
        report = blowup_sweep(plan, threads=2)
        assert [row.k for row in report.rows] == [2, 3, 4]
        assert report.final_display_ok
        assert report.passed
        assert final_display_bound(plan, 1) == pytest.approx(2.0 ** -16)

    def test_rows_keep_k_order_with_threads(self):
        plan = t4b_plan()
        assert [row.k for row in blowup_sweep(plan, ks=[3, 1, 2], threads=3).rows] == [3, 1, 2]

    def test_rows_below_a_frozen_constant_fail(self):
        plan = t1b_plan()
        honest = blowup_sweep(plan)
        assert honest.passed
        assert blowup_sweep(plan, floor_c=honest.fitted_c).bounded_below

        F = build_martingale(plan, mode=ScalarMode.FLOAT)
        faint = DyadicMartingale.from_terminal(F.terminal * 1e-12)
        report = blowup_sweep(plan, F=faint, floor_c=honest.fitted_c)
        assert report.monotone
        assert not report.bounded_below
        assert not report.passed
        assert report.to_dict()['floor_c'] == honest.fitted_c

    def test_zero_floor_never_passes(self):
        assert not blowup_sweep(t1b_plan(), floor_c=0.0).bounded_below

    @pytest.mark.slow
    @pytest.mark.parametrize("name,rows", [('t1b.json', 6), ('t2b.json', 10), ('t3b.json', 2), ('t4b.json', 3)])
    def test_shipped_plans_grow(self, name, rows):
        report = blowup_sweep(load_plan(PLAN_DIR / name), threads=2)
        assert len(report.rows) == rows
        assert report.monotone
        assert report.passed

    @pytest.mark.parametrize("make_plan", [t3b_plan, t4b_plan])
    def test_modulus_certificates(self, make_plan):
        rows = modulus_certificates(make_plan())
        assert all(row.passed for row in rows)
        assert rows[-1].modulus_power == pytest.approx(rows[-1].tail_power_sum)

    def test_tail_kernel_mass(self):
        row = tail_kernel_mass(85, 8)
        assert row.n == 21
        assert row.mass > 0
        assert row.ratio == pytest.approx(row.mass / 8)
        assert tail_kernel_mass(64, 8).mass == 0.0

    @pytest.mark.parametrize("M", [6, 8, 10])
    def test_tail_mass_floor_is_stable(self, M):
        rows = tail_mass_sweep(M)
        assert [row.alpha for row in rows] == [alpha_family(AlphaRule.ALTERNATING, j) for j in range(1, len(rows) + 1)]
        assert all(index_stats(row.alpha).msb < M for row in rows)
        assert rows[0].ratio == 0.25
        assert min(row.ratio for row in rows) == 0.25
