"""
Verifier commands: kernel identities, kernel lemmas, bound sweeps, counterexample
experiments, index statistics and benchmarks.

Each command returns a CommandReport whose rows are flat dicts with a fixed
column order per command, so JSON and CSV carry the same content.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from dyadika.logging_config import get_logger, log_performance
from dyadika.models import Regime, RunConfig, ScalarMode
from dyadika.services.config_service import ConfigService
from dyadika.services.counterexamples import (
    SequencePlan,
    block_atom,
    blowup_sweep,
    build_martingale,
    decomposition_check,
    load_plan,
    modulus_certificates,
    spectrum_check,
    tail_mass_sweep,
)
from dyadika.services.dyadic_domain import Point, StepFunction, random_function
from dyadika.services.fixtures import FixtureStore
from dyadika.services.hardy import Atom, DyadicMartingale, hp_norm, random_atom, refine_atom
from dyadika.services.index_math import block_decomposition, index_stats, is_power_of_two, tails
from dyadika.services.transforms import (
    IdentityReport,
    Spectrum,
    analyze,
    analyze_naive,
    conjugation_commutes_check,
    coset_integral_sweep,
    dirichlet_bits_check,
    dirichlet_closed_form_check,
    fast_naive_check,
    fejer_closed_form_check,
    fejer_scaled_decomposed,
    fejer_scaled_direct,
    fejer_weights,
    kernel_ratio_fits,
    kernel_sweep,
    lemma3_lower_bound,
    lower_bound_exact_value,
    majorant_fitted_constant,
    mersenne_expansion_check,
    parseval_gap,
    set_bit_assembly_check,
    shift_lemma_sweep,
    smoothing_identity_check,
    synthesize,
    synthesize_naive,
    walsh_int,
)

logger = get_logger('verifier')

HALF = Fraction(1, 2)


@dataclass
class CommandReport:
    command: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    passed: bool = True

    def add(self, **row) -> None:
        self.rows.append({column: row.get(column) for column in self.columns})
        if row.get('passed') is False:
            self.passed = False

    def to_dict(self, config: RunConfig) -> Dict[str, Any]:
        return {
            'command': self.command,
            'resolution': config.resolution,
            'mode': config.mode.value,
            'seed': config.seed,
            'passed': self.passed,
            'summary': self.summary,
            'rows': self.rows,
        }


def _text(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


class Verifier:
    """Runs one command against the loaded configuration"""

    def __init__(self, config: RunConfig, settings: Optional[Dict[str, Any]] = None):
        self.config = config
        self.settings = settings if settings is not None else self._load_settings()
        tolerance = self.settings.get('tolerance', {})
        self.fixtures = FixtureStore(self.settings.get('fixtures', {}).get('path', 'fixtures/constants.yml'),
                                     growth=tolerance.get('fixture_growth', 0.05))
        self.calibration_resolution = self.settings.get('resolution', {}).get('calibration', 6)

    @staticmethod
    def _load_settings() -> Dict[str, Any]:
        return {
            'resolution': ConfigService.get_resolution_config(),
            'tolerance': ConfigService.get_tolerance_config(),
            'sweep': ConfigService.get_sweep_config(),
            'bounds': ConfigService.get_bounds_config(),
            'counterexamples': ConfigService.get_counterexample_config(),
            'bench': ConfigService.get_bench_config(),
            'fixtures': {'path': str(ConfigService.get_fixture_path())},
        }

    def run(self) -> CommandReport:
        handler = getattr(self, f"cmd_{self.config.command.value}")
        started = time.perf_counter()
        report = handler()
        log_performance(f"command {self.config.command.value}", time.perf_counter() - started,
                        f"M={self.config.resolution}")
        logger.info(f"{self.config.command.value}: {len(report.rows)} rows, passed={report.passed}")
        return report

    # ------------------------------------------------------------------
    # fixtures
    # ------------------------------------------------------------------

    def _fixture_row(self, report: CommandReport, name: str, measured, fit: Callable[[int], Any],
                     floor: bool = False) -> None:
        self.fixtures.ensure(name, fit, self.calibration_resolution, self.config.calibrate)
        comparison = self.fixtures.compare(name, measured, floor)
        report.add(check='fixture', n=None, detail=name, value=float(measured),
                   bound=comparison.allowed, passed=comparison.passed)

    # ------------------------------------------------------------------
    # kernels
    # ------------------------------------------------------------------

    def cmd_kernels(self) -> CommandReport:
        M, mode = self.config.resolution, self.config.mode
        report = CommandReport('kernels', ['check', 'count', 'max_gap', 'failures', 'passed'])

        def family(name: str, results: Sequence) -> None:
            gaps = [r.max_abs_gap for r in results]
            failures = sum(1 for r in results if not r.passed)
            report.add(check=name, count=len(results), max_gap=_text(max(gaps)) if gaps else 0,
                       failures=failures, passed=failures == 0)

        family('dirichlet_closed_form', [dirichlet_closed_form_check(m, M, mode) for m in range(M + 1)])
        family('fejer_closed_form', [fejer_closed_form_check(m, M, mode) for m in range(M + 1)])

        assembled, bits = [], []
        for n, dirichlet, scaled in kernel_sweep(M):
            assembled.append(set_bit_assembly_check(n, M, mode, direct=scaled))
            bits.append(dirichlet_bits_check(n, M, mode, direct=dirichlet))
        family('fejer_set_bit_assembly', assembled)
        family('dirichlet_bits', bits)
        family('shift_lemma', shift_lemma_sweep(M, mode))
        family('mersenne_expansion', [mersenne_expansion_check(n, M, mode) for n in range(1, M + 1)])
        self._transform_families(family, M, mode)

        report.summary = {'orders': 1 << M}
        return report

    def _transform_families(self, family: Callable, M: int, mode: ScalarMode) -> None:
        """Fast against naive analysis, Parseval, and the two Fejer-mean identities on seeded data"""
        rng = np.random.default_rng(self.config.seed)
        count = self.settings.get('sweep', {}).get('random_functions', 100)

        # the naive path costs 4^M scalar products
        naive_M = min(M, 10)
        functions = [StepFunction.from_integers(walsh_int(n, naive_M), naive_M, mode)
                     for n in range(1 << naive_M)]
        functions.extend(random_function(rng, naive_M, mode) for _ in range(count))
        family('fast_vs_naive', [fast_naive_check(f) for f in functions])

        gaps = [parseval_gap(f) for f in functions]
        family('parseval', [IdentityReport('parseval', {'M': naive_M}, gap, gap <= 1e-9) for gap in gaps])

        identity_M = min(M, 8)
        smoothing, conjugation = [], []
        for _ in range(2 * count):
            f = random_function(rng, identity_M, mode)
            n = int(rng.integers(2, (1 << identity_M) + 1))
            k = int(rng.integers(0, (n - 1).bit_length()))
            t = Point(identity_M, int(rng.integers(0, 1 << identity_M)))
            smoothing.append(smoothing_identity_check(f, n, k))
            conjugation.append(conjugation_commutes_check(f, n, t))
        family('smoothing_identity', smoothing)
        family('conjugation_commutes', conjugation)

    # ------------------------------------------------------------------
    # lemmas
    # ------------------------------------------------------------------

    def cmd_lemmas(self) -> CommandReport:
        M = self.config.resolution
        sweep = self.settings.get('sweep', {})
        extra_bits = self.settings.get('resolution', {}).get('integral_extra_bits', 4)
        report = CommandReport('lemmas', ['check', 'n', 'detail', 'value', 'bound', 'passed'])

        n_max = (1 << min(M, sweep.get('lower_bound_max_bits', 10))) - 1
        if M >= 2:
            self._lower_bound_rows(report, M, n_max)
            result = coset_integral_sweep(M, extra_bits, sweep.get('integral_stride', 1))
            report.add(check='integral_bound', n=result.worst_n, detail=f"k={result.worst_k},l={result.worst_l}",
                       value=result.fitted_c, bound=None, passed=True)
            self._fixture_row(report, 'coset_integral_c', result.fitted_c,
                              lambda m: coset_integral_sweep(m, extra_bits, sweep.get('integral_stride', 1)).fitted_c)

        fitted = self._majorant_fit(M, n_max)
        report.add(check='kernel_majorant', n=None, detail=f"n<={n_max}", value=float(fitted),
                   bound=None, passed=True)
        # frozen over the full configured order range; a run at M covers n < 2^min(M, bits)
        bits = sweep.get('lower_bound_max_bits', 10)
        self._fixture_row(report, 'majorant_c', fitted,
                          lambda m: self._majorant_fit(max(m, bits), (1 << bits) - 1))

        if M >= 3:
            masses = tail_mass_sweep(M)
            weakest = min(masses, key=lambda row: row.ratio)
            report.add(check='tail_kernel_mass', n=weakest.alpha, detail=f"alphas={len(masses)}",
                       value=weakest.ratio, bound=None, passed=True)
            self._fixture_row(report, 'tail_mass_c', weakest.ratio,
                              lambda m: min(row.ratio for row in tail_mass_sweep(m)), floor=True)

        fits = kernel_ratio_fits(M)
        for name, value in fits.items():
            self._fixture_row(report, f"kernel_{name}", value, lambda m, key=name: kernel_ratio_fits(m)[key])
        report.summary = {'lower_bound_orders': n_max if M >= 2 else 0,
                          'fits': {name: str(value) for name, value in fits.items()}}
        return report

    def _lower_bound_rows(self, report: CommandReport, M: int, n_max: int) -> None:
        checked = violations = skipped = mismatches = 0
        weakest = None
        for n, _, scaled in kernel_sweep(M, n_max):
            for row in lemma3_lower_bound(n, M, scaled):
                if not row.admissible:
                    skipped += 1
                    continue
                checked += 1
                if not row.passed:
                    violations += 1
                if row.l >= 1 and row.minimum != lower_bound_exact_value(n, row.l):
                    mismatches += 1
                margin = Fraction(row.minimum) / row.bound
                if weakest is None or margin < weakest[0]:
                    weakest = (margin, n, row.l)
        report.add(check='kernel_lower_bound', n=weakest[1] if weakest else None,
                   detail=f"blocks={checked},skipped={skipped}",
                   value=violations, bound=0, passed=violations == 0)
        report.add(check='kernel_lower_bound_exact_value', n=None, detail=f"blocks={checked}",
                   value=mismatches, bound=0, passed=mismatches == 0)
        if weakest:
            report.add(check='kernel_lower_bound_margin', n=weakest[1], detail=f"l={weakest[2]}",
                       value=float(weakest[0]), bound=1.0, passed=weakest[0] >= 1)

    @staticmethod
    def _majorant_fit(M: int, n_max: int) -> Fraction:
        best = Fraction(0)
        for n, _, scaled in kernel_sweep(M, n_max):
            best = max(best, majorant_fitted_constant(n, M, scaled))
        return best

    # ------------------------------------------------------------------
    # bounds
    # ------------------------------------------------------------------

    def _orders(self, M: int) -> List[int]:
        cap = self.settings.get('bounds', {}).get('max_orders', 1024)
        stride = max(1, (1 << M) // cap)
        orders = set(range(1, (1 << M) + 1, stride))
        orders.update(1 << m for m in range(M + 1))
        return sorted(orders)

    def _atoms(self, M: int, p: Fraction, seed: int) -> List[Atom]:
        """One family per (p, seed): drawn at the calibration resolution and refined to M"""
        rng = np.random.default_rng(seed)
        count = self.settings.get('bounds', {}).get('atoms_per_p', 4)
        level = min(M, self.calibration_resolution)
        atoms = [block_atom(1, p, M, ScalarMode.FLOAT)] if M >= 2 else []
        atoms.extend(refine_atom(random_atom(rng, level, p, ScalarMode.FLOAT), M) for _ in range(count))
        return atoms

    def _ratio_sweep(self, atom: Atom, p: Fraction, M: int) -> Dict[str, Any]:
        """Largest normalized H_p norm of sigma_n a over the sampled orders"""
        base = hp_norm(DyadicMartingale.from_terminal(atom.f), p)
        c = analyze(atom.f)
        best, argmax, dyadic = 0.0, None, 0.0
        for n in self._orders(M):
            sigma = synthesize(Spectrum(M, c.coeffs * fejer_weights(n, M, ScalarMode.FLOAT), c.mode))
            value = hp_norm(DyadicMartingale.from_terminal(sigma), p) / base
            stats = index_stats(n)
            if p == HALF:
                ratio = value / stats.variation ** 2
            elif p < HALF:
                ratio = value / 2.0 ** (stats.span * float(1 / p - 2))
            else:
                ratio = value
            if ratio > best:
                best, argmax = ratio, n
            if stats.is_power_of_two:
                dyadic = max(dyadic, value)
        return {'max_ratio': best, 'argmax_n': argmax, 'dyadic_max': dyadic, 'support_level': atom.support.level}

    def _bounds_fit(self, p: Fraction, M: int) -> float:
        return max(row['max_ratio'] for row in self._bound_rows(p, M))

    def _bound_rows(self, p: Fraction, M: int) -> List[Dict[str, Any]]:
        atoms = self._atoms(M, p, self.config.seed)
        with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
            return list(executor.map(lambda atom: self._ratio_sweep(atom, p, M), atoms))

    def cmd_bounds(self) -> CommandReport:
        M = self.config.resolution
        report = CommandReport('bounds', ['p', 'kind', 'atom', 'support_level', 'max_ratio', 'argmax_n',
                                          'dyadic_max', 'passed'])
        for p in self.config.exponents:
            kind = 'R1' if p == HALF else ('R2' if p < HALF else 'R0')
            rows = self._bound_rows(p, M)
            for i, row in enumerate(rows):
                report.add(p=str(p), kind=kind, atom=i, passed=True, **row)
            measured = max(row['max_ratio'] for row in rows)
            name = f"bounds_{kind}_p={p}"
            self.fixtures.ensure(name, lambda m, q=p: self._bounds_fit(q, m), self.calibration_resolution,
                                 self.config.calibrate)
            comparison = self.fixtures.compare(name, measured)
            report.add(p=str(p), kind=f"{kind}_fixture", atom=None, support_level=None,
                       max_ratio=measured, argmax_n=None, dyadic_max=comparison.allowed,
                       passed=comparison.passed)
        report.summary = {'orders': len(self._orders(M))}
        return report

    # ------------------------------------------------------------------
    # counterexamples
    # ------------------------------------------------------------------

    def _plans(self) -> List[SequencePlan]:
        section = self.settings.get('counterexamples', {})
        budgets = section.get('budgets', {})
        if self.config.plan:
            return [load_plan(self.config.plan, budgets)]
        plan_dir = Path(section.get('plan_dir', 'plans'))
        return [load_plan(plan_dir / name, budgets) for name in section.get('default_plans', [])]

    def _blowup_floor(self, plan: SequencePlan, F: DyadicMartingale) -> Dict[str, Any]:
        """Frozen lower constant for the plan's blow-up rows, fitted at the plan's own resolution"""
        name = f"blowup_{plan.regime.value}_{plan.key}"
        self.fixtures.ensure(name, lambda m: blowup_sweep(plan, F=F, threads=self.config.threads).fitted_c,
                             plan.resolution, self.config.calibrate)
        frozen = self.fixtures.get(name)
        return {'name': name, 'frozen': frozen, 'floor': frozen / (1 + self.fixtures.growth)}

    def cmd_counterexample(self) -> CommandReport:
        mode = self.config.mode
        report = CommandReport('counterexample', ['k', 'alpha', 'measured', 'paper_bound'])
        summaries = []
        for plan in self._plans():
            F = build_martingale(plan, mode=mode)
            spectrum_rows, zero_off = spectrum_check(plan, F)
            c = analyze(F.terminal)
            decompositions = [decomposition_check(plan, k, F, spectrum=c) for k in range(1, len(plan.alphas) + 1)]

            F_float = F if mode is ScalarMode.FLOAT else DyadicMartingale.from_terminal(
                F.terminal.with_mode(ScalarMode.FLOAT))
            floor = self._blowup_floor(plan, F_float)
            blowup = blowup_sweep(plan, F=F_float, threads=self.config.threads, floor_c=floor['floor'])
            certificates = modulus_certificates(plan, F_float) if plan.regime in (Regime.T3B, Regime.T4B) else []

            first_row = len(report.rows)
            for row in blowup.rows:
                report.add(**row.to_dict())
            plan_passed = (blowup.passed and zero_off and all(r.passed for r in spectrum_rows)
                           and all(d.passed for d in decompositions) and all(c.passed for c in certificates))
            report.passed = report.passed and plan_passed
            summaries.append({
                'regime': plan.regime.value,
                'rows': [first_row, len(report.rows)],
                'plan': plan.to_dict(),
                'passed': plan_passed,
                'blowup': {key: value for key, value in blowup.to_dict().items() if key != 'rows'},
                'blowup_fixture': floor,
                'spectrum': [row.to_dict() for row in spectrum_rows],
                'spectrum_zero_off_blocks': zero_off,
                'decomposition': [d.to_dict() for d in decompositions],
                'certificates': [c.to_dict() for c in certificates],
            })
        report.summary = {'plans': summaries}
        return report

    # ------------------------------------------------------------------
    # stats
    # ------------------------------------------------------------------

    def cmd_stats(self) -> CommandReport:
        M = min(self.config.resolution, 16)
        report = CommandReport('stats', ['n', 'binary', 'msb', 'lsb', 'span', 'variation', 'popcount',
                                         'blocks', 'passed'])
        for n in range(1, 1 << M):
            stats = index_stats(n)
            decomposition = block_decomposition(n)
            tail_ok = all(t < (1 << bit) and (n >> bit) << bit == n - t for bit, t in tails(n))
            passed = (stats.variation == 2 * decomposition.count and decomposition.reconstruct() == n
                      and stats.variation <= 2 * stats.popcount and tail_ok
                      and (stats.span == 0) == is_power_of_two(n))
            report.add(n=n, binary=format(n, 'b'), msb=stats.msb, lsb=stats.lsb, span=stats.span,
                       variation=stats.variation, popcount=stats.popcount, blocks=decomposition.count,
                       passed=passed)
        report.summary = {'indices': (1 << M) - 1}
        return report

    # ------------------------------------------------------------------
    # bench
    # ------------------------------------------------------------------

    @staticmethod
    def _best_time(fn: Callable[[], Any], repeats: int) -> float:
        best = float('inf')
        for _ in range(repeats):
            started = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - started)
        return best

    def cmd_bench(self) -> CommandReport:
        """Wall-clock timings; not covered by the determinism guarantee"""
        bench = self.settings.get('bench', {})
        repeats = bench.get('repeats', 3)
        naive_cap = bench.get('naive_max_resolution', 12)
        rng = np.random.default_rng(self.config.seed)
        report = CommandReport('bench', ['M', 'naive_s', 'fast_s', 'speedup', 'naive_synthesize_s', 'synthesize_s',
                                         'kernel_direct_s', 'kernel_decomposed_s'])
        speedups = []
        for M in bench.get('resolutions', [4, 6, 8, 10, 12]):
            f = random_function(rng, M, ScalarMode.FLOAT)
            fast = self._best_time(lambda: analyze(f), repeats)
            naive = self._best_time(lambda: analyze_naive(f), repeats) if M <= naive_cap else None
            c = analyze(f)
            synth = self._best_time(lambda: synthesize(c), repeats)
            naive_synth = self._best_time(lambda: synthesize_naive(c), repeats) if M <= naive_cap else None
            n = (1 << M) - 1
            direct = self._best_time(lambda: fejer_scaled_direct(n, M), repeats)
            decomposed = self._best_time(lambda: fejer_scaled_decomposed(n, M), repeats)
            speedup = naive / fast if naive is not None and fast > 0 else None
            if speedup is not None:
                speedups.append(speedup)
            report.add(M=M, naive_s=naive, fast_s=fast, speedup=speedup, naive_synthesize_s=naive_synth,
                       synthesize_s=synth, kernel_direct_s=direct, kernel_decomposed_s=decomposed)
        report.passed = len(speedups) < 2 or speedups[-1] > speedups[0]
        report.summary = {'speedup_grows': report.passed}
        return report
