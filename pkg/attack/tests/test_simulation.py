"""
Tests for attack planning and the seeded simulation engine.
"""
import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from scipy.optimize import brentq

from attack.domain import BaselineStats, ChannelModel, Scenario, StrategyParams
from attack.exceptions import Infeasible, OutOfRange
from attack.povm import TwoStateDiscriminator
from attack.simulation import AttackSimulator, click_probability

W = 0.6
N = 1_000_000


def lossy_channel(dark=1e-5, pulses=N):
    return ChannelModel(transmittance=0.1, efficiency=0.2, dark_count_prob=dark, pulses=pulses)


def lossless_channel(pulses=1000):
    return ChannelModel(transmittance=1.0, efficiency=1.0, dark_count_prob=0.0, pulses=pulses)


def matched_scenario(seed, bob_mu=0.5, dark=1e-5, intrinsic_error=0.01, pulses=N, record_log=False):
    """Eve at mu = 0.5 matched to Bob's expected gain and QBER."""
    channel = lossy_channel(dark, pulses)
    baseline = AttackSimulator.baseline_stats(channel, bob_mu, W, intrinsic_error)
    strategy = AttackSimulator.solve_matching(W, 0.5, baseline, pulses)
    return Scenario(
        w=W, channel=channel, bob_mu=bob_mu, strategy=strategy, seed=seed,
        intrinsic_error=intrinsic_error, record_log=record_log,
    ), baseline


class BaselineTestCase(SimpleTestCase):
    """
    Test case for Bob's expected statistics without Eve.
    """

    def test_lossless_breidbart_bob(self):
        """Test a lossless minimum-error Bob clicks every slot with QBER 0.1."""
        mu = TwoStateDiscriminator.special_mu(W, 'breidbart')
        baseline = AttackSimulator.baseline_stats(lossless_channel(N), mu, W, 0.0)
        self.assertAlmostEqual(baseline.gain_gb, N, delta=1e-6)
        self.assertAlmostEqual(baseline.qber_eb, 0.1, delta=1e-12)

    def test_lossy_gain(self):
        """Test T = 0.1, eta = 0.2, mu = 0.5 without darks gives 0.0111 clicks per pulse."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(dark=0.0), 0.5, W, 0.0)
        self.assertAlmostEqual(baseline.gain_per_pulse, 0.02 * 5.0 / 9.0, delta=1e-12)
        self.assertAlmostEqual(baseline.qber_eb, 0.02, delta=1e-12)

    def test_dark_counts_and_intrinsic_error(self):
        """Test dark counts add d (1 - c) clicks at error rate one half."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(dark=1e-5), 0.5, W, 0.01)
        c = 0.02 * 5.0 / 9.0
        e_prime = 0.02 * 0.99 + 0.98 * 0.01
        rate = c + (1 - c) * 1e-5
        self.assertAlmostEqual(baseline.gain_per_pulse, rate, delta=1e-15)
        self.assertAlmostEqual(baseline.qber_eb, (c * e_prime + (1 - c) * 0.5e-5) / rate, delta=1e-12)

    def test_intrinsic_error_range(self):
        """Test an intrinsic error above one half is rejected."""
        with self.assertRaises(OutOfRange):
            AttackSimulator.baseline_stats(lossy_channel(), 0.5, W, 0.6)


class FeasibilityTestCase(SimpleTestCase):
    """
    Test case for eve_gain and attack_feasible.
    """

    def test_lossless_usd_infeasible(self):
        """Test a USD Eve gets 500 < 1000 clicks against a lossless minimum-error Bob."""
        bob_mu = TwoStateDiscriminator.special_mu(0.5, 'breidbart')
        baseline = AttackSimulator.baseline_stats(lossless_channel(1000), bob_mu, 0.5, 0.0)
        self.assertAlmostEqual(AttackSimulator.eve_gain(0.5, 0.5, 1000), 500.0, delta=1e-9)
        self.assertFalse(AttackSimulator.attack_feasible(0.5, 0.5, baseline, 1000))

    def test_lossy_feasible(self):
        """Test Eve's 0.5556 per pulse beats Bob's 0.0111 per pulse."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(dark=0.0), 0.5, W, 0.0)
        self.assertAlmostEqual(AttackSimulator.eve_gain(W, 0.5, N) / N, 5.0 / 9.0, delta=1e-12)
        self.assertTrue(AttackSimulator.attack_feasible(W, 0.5, baseline, N))

    def test_equal_gains_feasible(self):
        """Test G_E = G_B exactly counts as feasible."""
        gain = AttackSimulator.eve_gain(W, 0.5, 1000)
        baseline = BaselineStats(gain_gb=gain, qber_eb=0.02, pulses=1000)
        self.assertTrue(AttackSimulator.attack_feasible(W, 0.5, baseline, 1000))


class MatchingTestCase(SimpleTestCase):
    """
    Test case for solve_matching and flip_probability.
    """

    def test_flip_probability(self):
        """Test e_E = 0.01 against E_B = 0.03 needs zeta = 0.02 / 0.98."""
        self.assertAlmostEqual(AttackSimulator.flip_probability(0.01, 0.03), 0.02 / 0.98, delta=1e-15)

    def test_flip_probability_infeasible(self):
        """Test a target below Eve's own error rate is an error-kind Infeasible."""
        with self.assertRaises(Infeasible) as ctx:
            AttackSimulator.flip_probability(0.05, 0.03)
        self.assertEqual(ctx.exception.kind, 'error')

    def test_noiseless_matching(self):
        """Test xi = G_B / G_E and zeta = (E_B - e_E)/(1 - 2 e_E) without dark counts."""
        channel = lossy_channel(dark=0.0)
        baseline = AttackSimulator.baseline_stats(channel, 0.5, W, 0.01)
        strategy = AttackSimulator.solve_matching(W, 0.5, baseline, N)
        ge = AttackSimulator.eve_gain(W, 0.5, N)
        self.assertAlmostEqual(strategy.resend_throttle_xi, baseline.gain_gb / ge, delta=1e-12)
        expected_zeta = (baseline.qber_eb - 0.02) / (1 - 0.04)
        self.assertAlmostEqual(strategy.flip_prob_zeta, expected_zeta, delta=1e-12)

    def test_default_scenario_matching(self):
        """Test the default scenario matches with xi = G_B / G_E and zeta close to 0.01."""
        scenario, baseline = matched_scenario(0)
        self.assertAlmostEqual(scenario.strategy.resend_throttle_xi * 5.0 / 9.0, 0.02 / 0.9 * 0.5, delta=1e-6)
        self.assertAlmostEqual(scenario.strategy.flip_prob_zeta, 0.01, delta=1e-3)

    def test_rate_infeasible(self):
        """Test a lossless channel leaves a USD Eve rate-infeasible."""
        bob_mu = TwoStateDiscriminator.special_mu(W, 'breidbart')
        baseline = AttackSimulator.baseline_stats(lossless_channel(1000), bob_mu, W, 0.0)
        with self.assertRaises(Infeasible) as ctx:
            AttackSimulator.solve_matching(W, W, baseline, 1000)
        self.assertEqual(ctx.exception.kind, 'rate')

    def test_resend_error_target(self):
        """Test dark clicks leave the faked clicks Bob's signal error rate e', below E_B."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(), 0.5, W, 0.01)
        e_prime = 0.02 * 0.99 + 0.98 * 0.01
        self.assertAlmostEqual(AttackSimulator.resend_error_target(baseline), e_prime, delta=1e-12)
        self.assertLess(e_prime, baseline.qber_eb)
        self.assertIsNone(AttackSimulator.resend_error_target(BaselineStats(0.0, 0.0, pulses=10)))

    def test_error_rate_between_target_and_qber(self):
        """Test an Eve with e_r < e_E < E_B is rejected by matching, comparison and simulation alike."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(), 0.5, W, 0.01)
        midpoint = 0.5 * (AttackSimulator.resend_error_target(baseline) + baseline.qber_eb)
        mu = brentq(
            lambda m: TwoStateDiscriminator.outcome_probs_closed_form(W, m).conditional_error - midpoint,
            TwoStateDiscriminator.special_mu(W, 'breidbart'), W,
        )
        e_e = TwoStateDiscriminator.outcome_probs_closed_form(W, mu).conditional_error
        self.assertLess(e_e, baseline.qber_eb)
        with self.assertRaises(Infeasible) as ctx:
            AttackSimulator.solve_matching(W, mu, baseline, N)
        self.assertEqual(ctx.exception.kind, 'error')

        self.assertFalse(AttackSimulator.error_matchable(e_e, baseline))
        mirror = AttackSimulator.compare_strategies(W, mu, baseline, N)[2]
        self.assertEqual(mirror.name, 'mirror_bob')
        self.assertTrue(mirror.rate_feasible)
        self.assertFalse(mirror.viable)

        channel = lossy_channel(pulses=10000)
        scenario = Scenario(w=W, channel=channel, bob_mu=0.5, strategy=StrategyParams(mu=mu), seed=3)
        self.assertFalse(AttackSimulator.simulate(scenario).report.feasibility)

    def test_error_infeasible(self):
        """Test a minimum-error Eve makes too many errors for a mu = 0.5 Bob."""
        baseline = AttackSimulator.baseline_stats(lossy_channel(), 0.5, W, 0.01)
        mu = TwoStateDiscriminator.special_mu(W, 'breidbart')
        with self.assertRaises(Infeasible) as ctx:
            AttackSimulator.solve_matching(W, mu, baseline, N)
        self.assertEqual(ctx.exception.kind, 'error')


class PlanningTestCase(SimpleTestCase):
    """
    Test case for sweep_feasibility, compare_strategies and choose_mu.
    """

    def setUp(self):
        """Baseline of the default lossy scenario."""
        self.baseline = AttackSimulator.baseline_stats(lossy_channel(), 0.5, W, 0.01)

    def test_sweep_marks_invalid_mu(self):
        """Test mu values violating the constraint are marked invalid."""
        records = AttackSimulator.sweep_feasibility(W, [0.1, 0.5, 1.2], self.baseline, N)
        self.assertEqual([r.valid for r in records], [False, True, False])

    def test_sweep_feasible_column_delegates(self):
        """Test the feasible flag equals attack_feasible on every row."""
        lossless = AttackSimulator.baseline_stats(lossless_channel(N), 0.5, W, 0.0)
        grid = np.linspace(TwoStateDiscriminator.special_mu(W, 'breidbart'), W, 25)
        for record in AttackSimulator.sweep_feasibility(W, grid, lossless, N):
            self.assertEqual(record.feasible, AttackSimulator.attack_feasible(W, record.mu, lossless, N))

    def test_compare_strategies(self):
        """Test USD and mirror-Bob Eves are viable and the minimum-error Eve is not."""
        assessments = {a.name: a for a in AttackSimulator.compare_strategies(W, 0.5, self.baseline, N)}
        self.assertEqual(list(assessments), ['usd', 'breidbart', 'mirror_bob'])
        self.assertTrue(assessments['usd'].viable)
        self.assertTrue(assessments['mirror_bob'].viable)
        self.assertTrue(assessments['breidbart'].rate_feasible)
        self.assertFalse(assessments['breidbart'].error_feasible)

    def test_choose_mu(self):
        """Test the chosen mu can be matched and beats every other matchable grid point."""
        mu = AttackSimulator.choose_mu(W, self.baseline, N)
        AttackSimulator.solve_matching(W, mu, self.baseline, N)
        grid = np.linspace(TwoStateDiscriminator.special_mu(W, 'breidbart'), W, 101)
        for record in AttackSimulator.sweep_feasibility(W, grid, self.baseline, N):
            if record.zeta is not None:
                self.assertLessEqual(record.ge, AttackSimulator.eve_gain(W, mu, N))

    def test_choose_mu_infeasible(self):
        """Test a lossless mu = 0.5 Bob leaves no matchable grid point."""
        baseline = AttackSimulator.baseline_stats(lossless_channel(N), 0.5, W, 0.0)
        with self.assertRaises(Infeasible):
            AttackSimulator.choose_mu(W, baseline, N)


class SimulateTestCase(SimpleTestCase):
    """
    Test case for the seeded attack simulation.
    """

    def test_matched_statistics_over_seeds(self):
        """Test Bob's clicks and errors stay within 4 sigma of G_B and E_B G_B on 10 seeds."""
        for seed in range(10):
            scenario, baseline = matched_scenario(seed)
            report = AttackSimulator.simulate(scenario).report
            p = baseline.gain_per_pulse
            q = baseline.qber_eb * p
            self.assertLess(abs(report.bob_clicks - N * p), 4 * math.sqrt(N * p * (1 - p)), msg=f'seed {seed}')
            self.assertLess(abs(report.bob_errors - N * q), 4 * math.sqrt(N * q * (1 - q)), msg=f'seed {seed}')
            self.assertTrue(report.feasibility)

    def test_observed_qber_near_baseline(self):
        """Test the matched observed QBER is within 3 sigma of E_B."""
        scenario, baseline = matched_scenario(123)
        report = AttackSimulator.simulate(scenario).report
        sigma = math.sqrt(baseline.qber_eb * (1 - baseline.qber_eb) / report.bob_clicks)
        self.assertLess(abs(report.observed_qber - baseline.qber_eb), 3 * sigma)

    def test_full_key_knowledge(self):
        """Test every Bob click is faked when darks are off and fake clicks are certain."""
        for seed in range(5):
            scenario, _ = matched_scenario(seed, dark=0.0, pulses=200_000)
            report = AttackSimulator.simulate(scenario).report
            self.assertGreater(report.bob_clicks, 0)
            self.assertEqual(report.eve_key_knowledge_fraction, 1.0)

    def test_tally_invariants(self):
        """Test the tallies partition the slots consistently."""
        scenario, _ = matched_scenario(7, pulses=300_000)
        tallies = AttackSimulator.simulate(scenario).report.tallies
        self.assertEqual(tallies.pulses, 300_000)
        self.assertEqual(tallies.correct + tallies.error + tallies.inconclusive, tallies.pulses)
        self.assertEqual(tallies.resends + tallies.blocks, tallies.pulses)
        self.assertLessEqual(tallies.resends, tallies.correct + tallies.error)
        self.assertEqual(tallies.bob_clicks, tallies.fake_clicks + tallies.dark_clicks)
        self.assertLessEqual(tallies.flips, tallies.resends)

    def test_outcome_frequencies_match_closed_form(self):
        """Test Eve's outcome frequencies agree with the closed form."""
        scenario, _ = matched_scenario(3)
        tallies = AttackSimulator.simulate(scenario).report.tallies
        probs = TwoStateDiscriminator.outcome_probs_closed_form(W, 0.5)
        for count, p in ((tallies.correct, probs.p_correct), (tallies.error, probs.p_error),
                         (tallies.inconclusive, probs.p_inconclusive)):
            self.assertLess(abs(count - N * p), 4 * math.sqrt(N * p * (1 - p)))

    def test_same_seed_same_result(self):
        """Test identical scenarios give identical tallies and logs."""
        scenario, _ = matched_scenario(42, pulses=50_000, record_log=True)
        first = AttackSimulator.simulate(scenario)
        second = AttackSimulator.simulate(scenario)
        self.assertEqual(first.report, second.report)
        np.testing.assert_array_equal(first.log.bob_bit, second.log.bob_bit)

    def test_worker_count_does_not_change_results(self):
        """Test 1 and 4 workers produce identical results over many shards."""
        qca = dict(settings.QCA, SHARD_SIZE=1000)
        with override_settings(QCA=qca):
            scenario, _ = matched_scenario(9, pulses=10_500, record_log=True)
            single = AttackSimulator.simulate(scenario, workers=1)
            pooled = AttackSimulator.simulate(scenario, workers=4)
        self.assertEqual(single.report.tallies, pooled.report.tallies)
        for name in ('alice_bit', 'eve_outcome', 'action', 'bob_bit', 'detector_a', 'detector_b'):
            np.testing.assert_array_equal(getattr(single.log, name), getattr(pooled.log, name))

    def test_click_log_consistent_with_tallies(self):
        """Test the click log reproduces the report counts."""
        scenario, _ = matched_scenario(5, pulses=100_000, record_log=True)
        run = AttackSimulator.simulate(scenario)
        self.assertEqual(len(run.log), 100_000)
        self.assertEqual(int(run.log.bob_click.sum()), run.report.bob_clicks)
        self.assertEqual(int(run.log.double_clicks.sum()), run.report.tallies.double_clicks)
        errors = run.log.bob_click & (run.log.bob_bit != run.log.alice_bit)
        self.assertEqual(int(errors.sum()), run.report.bob_errors)

    def test_unmatched_attack_reports_infeasible(self):
        """Test a lossless USD attack is reported infeasible."""
        bob_mu = TwoStateDiscriminator.special_mu(0.5, 'breidbart')
        scenario = Scenario(
            w=0.5, channel=lossless_channel(1000), bob_mu=bob_mu,
            strategy=StrategyParams(mu=0.5), seed=1, intrinsic_error=0.0,
        )
        report = AttackSimulator.simulate(scenario).report
        self.assertFalse(report.feasibility)
        self.assertEqual(report.bob_clicks, report.tallies.correct + report.tallies.error)


class HonestSimulationTestCase(SimpleTestCase):
    """
    Test case for the no-Eve reference simulation.
    """

    def test_click_probability_edges(self):
        """Test zero shares, certain detection and the split identity."""
        self.assertEqual(click_probability(0.3, 0.0), 0.0)
        self.assertEqual(click_probability(1.0, 0.2), 1.0)
        c, e = 0.05, 0.1
        no_click = (1 - click_probability(c, 1 - e)) * (1 - click_probability(c, e))
        self.assertAlmostEqual(no_click, 1 - c, delta=1e-15)

    def test_honest_gain_matches_baseline(self):
        """Test honest clicks stay within 4 sigma of G_B and Eve tallies are zero."""
        scenario, baseline = matched_scenario(17)
        report = AttackSimulator.simulate_honest(scenario).report
        p = baseline.gain_per_pulse
        self.assertLess(abs(report.bob_clicks - N * p), 4 * math.sqrt(N * p * (1 - p)))
        self.assertEqual(report.tallies.correct + report.tallies.error + report.tallies.inconclusive, 0)
        self.assertEqual(report.eve_key_knowledge_fraction, 0.0)
        self.assertTrue(report.honest)

    def test_honest_qber_near_baseline(self):
        """Test the honest QBER is close to E_B."""
        scenario, baseline = matched_scenario(18)
        report = AttackSimulator.simulate_honest(scenario).report
        sigma = math.sqrt(baseline.qber_eb * (1 - baseline.qber_eb) / report.bob_clicks)
        self.assertLess(abs(report.observed_qber - baseline.qber_eb), 4 * sigma)

    def test_honest_log_actions(self):
        """Test the honest log marks every slot as passed with no Eve outcome."""
        scenario, _ = matched_scenario(2, pulses=20_000, record_log=True)
        log = AttackSimulator.simulate_honest(scenario).log
        self.assertTrue((log.action == 2).all())
        self.assertTrue((log.eve_outcome == -1).all())
