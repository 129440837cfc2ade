"""
Attack planning and Monte Carlo simulation.

``AttackSimulator`` holds the closed-form planning side (Bob's baseline,
Eve's gain, feasibility, matching xi/zeta to the baseline) and the seeded
per-pulse simulation of the blinding attack and of the honest protocol.

Simulations run in fixed-size shards. Each shard draws from its own
``PCG64`` stream spawned from the master seed, so results depend on the
seed and the pulse count only, never on the worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial, reduce
from operator import add
from typing import Optional

import numpy as np

from .clicklog import NO_EVE, ClickLog
from .conf import get_config
from .domain import (
    Action,
    BaselineStats,
    Outcome,
    SimulationReport,
    SimulationTallies,
    StrategyAssessment,
    StrategyParams,
    SweepRecord,
    check_range,
)
from .exceptions import ConstraintViolated, Infeasible, OutOfRange
from .feedforward import NO_BIT, FeedForwardController
from .povm import TwoStateDiscriminator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationRun:
    """A report plus the per-pulse log when one was requested."""

    report: SimulationReport
    log: Optional[ClickLog] = None


def click_probability(signal_prob, fraction):
    """
    Probability that one detector fires on its share of a signal.

    A fraction f of a pulse detected with probability c reaches the
    detector, which then fires with probability 1 - (1 - c)^f.
    """
    if fraction <= 0.0 or signal_prob <= 0.0:
        return 0.0
    if signal_prob >= 1.0:
        return 1.0
    return float(-np.expm1(fraction * np.log1p(-signal_prob)))


def _shard_sizes(pulses, shard_size):
    full, rest = divmod(int(pulses), shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _run_shards(job, sizes, seed, workers):
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if workers <= 1 or len(sizes) == 1:
        return [job(n, s) for n, s in zip(sizes, seeds)]
    with ThreadPoolExecutor(max_workers=min(workers, len(sizes))) as pool:
        return list(pool.map(job, sizes, seeds))


def _bob_readout(det_a, det_b, tie_bits):
    """Bob's bit per slot: the firing detector, a random bit on double clicks."""
    clicks = det_a | det_b
    bits = np.full(det_a.shape[0], NO_BIT, dtype=np.int8)
    bits[det_a & ~det_b] = 0
    bits[det_b & ~det_a] = 1
    double = det_a & det_b
    bits[double] = tie_bits[double]
    return clicks, bits


def _count(mask):
    return int(np.count_nonzero(mask))


def _attack_shard(n, seed_seq, probs, strategy, dark_each, record):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    alice = rng.integers(0, 2, size=n, dtype=np.int8)

    draw = rng.random(n)
    outcomes = np.full(n, Outcome.INCONCLUSIVE, dtype=np.int8)
    outcomes[draw < probs.p_correct + probs.p_error] = Outcome.ERROR
    outcomes[draw < probs.p_correct] = Outcome.CORRECT
    measured = np.where(outcomes == Outcome.ERROR, 1 - alice, alice).astype(np.int8)

    batch = FeedForwardController.feed_forward_batch(outcomes, measured, strategy, rng)
    fake = batch.resend & (rng.random(n) < strategy.fake_click_prob)
    dark_a = (rng.random(n) < dark_each) & ~fake
    dark_b = (rng.random(n) < dark_each) & ~fake
    tie_bits = rng.integers(0, 2, size=n, dtype=np.int8)

    det_a = (fake & (batch.bits == 0)) | dark_a
    det_b = (fake & (batch.bits == 1)) | dark_b
    clicks, bob_bits = _bob_readout(det_a, det_b, tie_bits)

    tallies = SimulationTallies(
        pulses=n,
        correct=_count(outcomes == Outcome.CORRECT),
        error=_count(outcomes == Outcome.ERROR),
        inconclusive=_count(outcomes == Outcome.INCONCLUSIVE),
        resends=_count(batch.resend),
        blocks=n - _count(batch.resend),
        flips=_count(batch.flips),
        fake_clicks=_count(fake),
        dark_clicks=_count(clicks & ~fake),
        bob_clicks=_count(clicks),
        bob_errors=_count(clicks & (bob_bits != alice)),
        double_clicks=_count(det_a & det_b),
    )
    log = None
    if record:
        log = ClickLog(
            alice_bit=alice,
            eve_outcome=outcomes,
            action=np.where(batch.resend, Action.RESEND, Action.BLOCK).astype(np.int8),
            bob_click=clicks,
            bob_bit=bob_bits,
            detector_a=det_a,
            detector_b=det_b,
        )
    return tallies, log


def _honest_shard(n, seed_seq, right_prob, wrong_prob, dark_each, record):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    alice = rng.integers(0, 2, size=n, dtype=np.int8)
    right = rng.random(n) < right_prob
    wrong = rng.random(n) < wrong_prob
    dark_a = rng.random(n) < dark_each
    dark_b = rng.random(n) < dark_each
    tie_bits = rng.integers(0, 2, size=n, dtype=np.int8)

    det_a = np.where(alice == 0, right, wrong) | dark_a
    det_b = np.where(alice == 1, right, wrong) | dark_b
    clicks, bob_bits = _bob_readout(det_a, det_b, tie_bits)

    tallies = SimulationTallies(
        pulses=n,
        dark_clicks=_count(clicks & ~(right | wrong)),
        bob_clicks=_count(clicks),
        bob_errors=_count(clicks & (bob_bits != alice)),
        double_clicks=_count(det_a & det_b),
    )
    log = None
    if record:
        log = ClickLog(
            alice_bit=alice,
            eve_outcome=np.full(n, NO_EVE, dtype=np.int8),
            action=np.full(n, Action.PASS, dtype=np.int8),
            bob_click=clicks,
            bob_bit=bob_bits,
            detector_a=det_a,
            detector_b=det_b,
        )
    return tallies, log


def _collect(results, record):
    tallies = reduce(add, (t for t, _ in results), SimulationTallies())
    log = ClickLog.concatenate(log for _, log in results) if record else None
    return tallies, log


def _report(tallies, feasible, strategy, baseline, honest):
    clicks = tallies.bob_clicks
    return SimulationReport(
        tallies=tallies,
        eve_gain_ge=tallies.correct + tallies.error,
        bob_clicks=clicks,
        bob_errors=tallies.bob_errors,
        observed_qber=tallies.bob_errors / clicks if clicks else 0.0,
        feasibility=feasible,
        eve_key_knowledge_fraction=tallies.fake_clicks / clicks if clicks else 0.0,
        strategy=strategy,
        baseline=baseline,
        honest=honest,
    )


class AttackSimulator:
    """
    Service class for the blinding attack.

    Provides methods to:
    - Compute Bob's expected gain and QBER without Eve
    - Compute Eve's conclusive gain and test rate feasibility
    - Solve for the throttle xi and flip probability zeta that match Bob's statistics
    - Sweep, compare and pick Eve's POVM regime
    - Run the seeded per-pulse simulation with and without Eve
    """

    @staticmethod
    def bob_signal(channel, bob_mu, w, intrinsic_error=0.0):
        """
        Per-pulse probability that Bob detects Alice's signal, and its error rate.

        Returns:
            tuple: (detection probability c, error fraction among detections e')
        """
        check_range('intrinsic_error', intrinsic_error, 0.0, 0.5)
        probs = TwoStateDiscriminator.outcome_probs_closed_form(w, bob_mu)
        conclusive = min(1.0, max(0.0, 1.0 - probs.p_inconclusive))
        signal = channel.transmittance * channel.efficiency * conclusive
        e_s = probs.conditional_error
        e_prime = e_s * (1.0 - intrinsic_error) + (1.0 - e_s) * intrinsic_error
        return signal, e_prime

    @staticmethod
    def baseline_stats(channel, bob_mu, w, intrinsic_error=0.0):
        """
        Bob's expected click count and QBER over ``channel.pulses`` slots.

        A slot clicks on a detected signal or, failing that, on a dark
        count; dark-count bits are random.

            G_B = N [c + (1 - c) d]
            E_B = [c e' + (1 - c) d / 2] / [c + (1 - c) d]

        Args:
            channel (ChannelModel): transmittance, efficiency, dark counts, N
            bob_mu (float): Bob's POVM regime
            w (float): state overlap
            intrinsic_error (float): optical misalignment error in [0, 0.5]

        Returns:
            BaselineStats
        """
        signal, e_prime = AttackSimulator.bob_signal(channel, bob_mu, w, intrinsic_error)
        d = channel.dark_count_prob
        rate = signal + (1.0 - signal) * d
        errors = signal * e_prime + (1.0 - signal) * d * 0.5
        qber = errors / rate if rate > 0 else 0.0
        baseline = BaselineStats(
            gain_gb=channel.pulses * rate,
            qber_eb=qber,
            pulses=channel.pulses,
            dark_count_prob=d,
        )
        logger.debug('Baseline for w=%.6g bob_mu=%.6g: G_B=%.6g E_B=%.6g',
                     w, bob_mu, baseline.gain_gb, baseline.qber_eb)
        return baseline

    @staticmethod
    def eve_gain(w, mu, pulses):
        """Expected number of conclusive outcomes, N (P_c + P_e)."""
        return pulses * TwoStateDiscriminator.outcome_probs_closed_form(w, mu).conclusive

    @staticmethod
    def attack_feasible(w, mu, baseline, pulses):
        """True iff Eve's conclusive gain reaches Bob's expected click count."""
        return AttackSimulator.eve_gain(w, mu, pulses) >= baseline.gain_gb

    @staticmethod
    def flip_probability(e_e, target):
        """
        zeta such that flipping a fraction zeta of resent bits turns Eve's
        error rate e_e into ``target``: e_e + zeta (1 - 2 e_e) = target.

        Raises:
            Infeasible: (error) when the target is below e_e or no zeta in [0, 0.5] reaches it
        """
        tol = get_config().constraint_tol
        spread = 1.0 - 2.0 * e_e
        if spread <= tol:
            if abs(target - e_e) <= tol:
                return 0.0
            raise Infeasible(f'error rate {e_e:.6g} cannot be steered to {target:.6g}',
                             kind='error', field='zeta')
        zeta = (target - e_e) / spread
        if zeta < -tol:
            raise Infeasible(
                f"Eve's error rate {e_e:.6g} exceeds the matched target {target:.6g}",
                kind='error', field='zeta',
            )
        if zeta > 0.5 + tol:
            raise Infeasible(f'target error {target:.6g} needs zeta={zeta:.6g} > 0.5',
                             kind='error', field='zeta')
        return min(0.5, max(0.0, zeta))

    @staticmethod
    def faked_click_fraction(baseline):
        """
        Share of slots that must carry a faked click, rho p_f.

        Solves rho p_f + (1 - rho p_f) d = G_B / N; dark counts cover the rest.
        """
        d = baseline.dark_count_prob
        return max(0.0, (baseline.gain_per_pulse - d) / (1.0 - d))

    @staticmethod
    def resend_error_target(baseline):
        """
        Error rate e_r the faked clicks must carry so Bob sees E_B G_B errors.

        Dark clicks on the remaining slots contribute d / 2 errors each.

        Returns:
            float or None: None when no faked clicks are needed
        """
        faked = AttackSimulator.faked_click_fraction(baseline)
        if faked <= 0.0:
            return None
        d = baseline.dark_count_prob
        return (baseline.qber_eb * baseline.gain_per_pulse - (1.0 - faked) * d * 0.5) / faked

    @staticmethod
    def error_matchable(e_e, baseline):
        """True iff some zeta in [0, 0.5] turns Eve's error rate into the resend target."""
        target = AttackSimulator.resend_error_target(baseline)
        if target is None:
            return True
        try:
            AttackSimulator.flip_probability(e_e, target)
        except Infeasible:
            return False
        return True

    @staticmethod
    def solve_matching(w, mu, baseline, pulses, fake_click_prob=1.0):
        """
        Choose xi and zeta so that Bob's clicks and errors match ``baseline``.

        Faked clicks land on a fraction rho p_f of slots; the remaining slots
        can still dark-count. Matching the click rate and the error count:

            rho p_f + (1 - rho p_f) d            = G_B / N
            rho p_f e_r + (1 - rho p_f) d / 2    = E_B G_B / N

        then xi = rho / (P_c + P_e) and e_E + zeta (1 - 2 e_E) = e_r.

        Returns:
            StrategyParams

        Raises:
            Infeasible: (rate) if G_E < G_B or xi would exceed 1;
                (error) if no zeta in [0, 0.5] matches the error count
        """
        check_range('fake_click_prob', fake_click_prob, 0.0, 1.0, low_open=True)
        tol = get_config().constraint_tol
        probs = TwoStateDiscriminator.outcome_probs_closed_form(w, mu)
        eve_gain = pulses * probs.conclusive
        if eve_gain < baseline.gain_gb:
            raise Infeasible(
                f'Eve gain {eve_gain:.6g} below Bob baseline {baseline.gain_gb:.6g}',
                kind='rate', field='eve_mu',
            )

        rho = AttackSimulator.faked_click_fraction(baseline) / fake_click_prob
        xi = rho / probs.conclusive if probs.conclusive > 0 else 0.0
        if xi > 1.0 + tol:
            raise Infeasible(f'matching needs xi={xi:.6g} > 1', kind='rate', field='xi')
        xi = min(1.0, xi)

        target = AttackSimulator.resend_error_target(baseline)
        zeta = 0.0 if target is None else AttackSimulator.flip_probability(probs.conditional_error, target)
        logger.info('Matched strategy for w=%.6g mu=%.6g: xi=%.6g zeta=%.6g', w, mu, xi, zeta)
        return StrategyParams(
            mu=mu,
            resend_throttle_xi=xi,
            flip_prob_zeta=zeta,
            fake_click_prob=fake_click_prob,
        )

    @staticmethod
    def sweep_feasibility(w, mu_grid, baseline, pulses):
        """
        Evaluate each mu on a grid; invalid mu values are marked, not raised.

        Returns:
            list[SweepRecord]
        """
        records = []
        for mu in mu_grid:
            mu = float(mu)
            try:
                probs = TwoStateDiscriminator.outcome_probs_closed_form(w, mu)
            except (OutOfRange, ConstraintViolated):
                records.append(SweepRecord(mu=mu, valid=False))
                continue
            ge = pulses * probs.conclusive
            try:
                zeta = AttackSimulator.solve_matching(w, mu, baseline, pulses).flip_prob_zeta
            except Infeasible:
                zeta = None
            records.append(SweepRecord(
                mu=mu,
                valid=True,
                probs=probs,
                ge=ge,
                feasible=ge >= baseline.gain_gb,
                e_e=probs.conditional_error,
                zeta=zeta,
            ))
        return records

    @staticmethod
    def compare_strategies(w, bob_mu, baseline, pulses):
        """
        Assess the USD, minimum-error and mirror-Bob regimes for Eve.

        Returns:
            list[StrategyAssessment]: in that order
        """
        candidates = (
            ('usd', TwoStateDiscriminator.special_mu(w, 'usd')),
            ('breidbart', TwoStateDiscriminator.special_mu(w, 'breidbart')),
            ('mirror_bob', float(bob_mu)),
        )
        assessments = []
        for name, mu in candidates:
            probs = TwoStateDiscriminator.outcome_probs_closed_form(w, mu)
            ge = pulses * probs.conclusive
            assessments.append(StrategyAssessment(
                name=name,
                mu=mu,
                ge=ge,
                rate_feasible=ge >= baseline.gain_gb,
                e_e=probs.conditional_error,
                error_feasible=AttackSimulator.error_matchable(probs.conditional_error, baseline),
            ))
        return assessments

    @staticmethod
    def choose_mu(w, baseline, pulses, steps=101):
        """
        Largest-gain mu in [mu_B, w] for which matching succeeds.

        Raises:
            Infeasible: when no grid point can match the baseline
        """
        if int(steps) != steps or steps < 2:
            raise OutOfRange('steps must be an integer >= 2', field='steps')
        grid = np.linspace(TwoStateDiscriminator.special_mu(w, 'breidbart'), w, int(steps))
        best = None
        rate_ok = False
        for record in AttackSimulator.sweep_feasibility(w, grid, baseline, pulses):
            rate_ok = rate_ok or record.feasible
            if record.zeta is None:
                continue
            if best is None or record.ge > best.ge:
                best = record
        if best is None:
            kind = 'error' if rate_ok else 'rate'
            raise Infeasible(f'no mu in [mu_B, w] matches the baseline ({kind})', kind=kind, field='eve_mu')
        return best.mu

    @staticmethod
    def simulate(scenario, workers=None):
        """
        Seeded per-pulse simulation of the attack.

        Per shard the draws are, in order: Alice's bits, Eve's outcomes, the
        feed-forward throttle and flip uniforms, the fake-click uniforms,
        detector A and B dark counts, and the double-click tie bits.

        Args:
            scenario (Scenario): channel, regimes, strategy, seed
            workers (int, optional): thread count; defaults to the configured one

        Returns:
            SimulationRun
        """
        config = get_config()
        workers = config.workers if workers is None else workers
        channel = scenario.channel
        strategy = scenario.strategy
        probs = TwoStateDiscriminator.outcome_probs_closed_form(scenario.w, strategy.mu)
        baseline = AttackSimulator.baseline_stats(
            channel, scenario.bob_mu, scenario.w, scenario.intrinsic_error,
        )
        feasible = (
            AttackSimulator.attack_feasible(scenario.w, strategy.mu, baseline, channel.pulses)
            and AttackSimulator.error_matchable(probs.conditional_error, baseline)
        )

        sizes = _shard_sizes(channel.pulses, config.shard_size)
        logger.info('Simulating attack: %d pulses in %d shards on %d workers',
                    channel.pulses, len(sizes), workers)
        job = partial(
            _attack_shard,
            probs=probs,
            strategy=strategy,
            dark_each=channel.dark_count_per_detector,
            record=scenario.record_log,
        )
        tallies, log = _collect(_run_shards(job, sizes, scenario.seed, workers), scenario.record_log)
        report = _report(tallies, feasible, strategy, baseline, honest=False)
        logger.info('Attack run: Bob clicks=%d errors=%d qber=%.6g',
                    report.bob_clicks, report.bob_errors, report.observed_qber)
        return SimulationRun(report=report, log=log)

    @staticmethod
    def simulate_honest(scenario, workers=None):
        """
        Seeded per-pulse simulation of the protocol without Eve.

        A detected signal reaches the detector of Alice's bit with share
        1 - e' and the other detector with share e'. Per shard the draws
        are Alice's bits, the right- and wrong-detector signal uniforms,
        detector A and B dark counts and the tie bits.

        Returns:
            SimulationRun: Eve tallies are zero and every action is ``pass``
        """
        config = get_config()
        workers = config.workers if workers is None else workers
        channel = scenario.channel
        signal, e_prime = AttackSimulator.bob_signal(
            channel, scenario.bob_mu, scenario.w, scenario.intrinsic_error,
        )
        baseline = AttackSimulator.baseline_stats(
            channel, scenario.bob_mu, scenario.w, scenario.intrinsic_error,
        )
        sizes = _shard_sizes(channel.pulses, config.shard_size)
        logger.info('Simulating honest protocol: %d pulses in %d shards', channel.pulses, len(sizes))
        job = partial(
            _honest_shard,
            right_prob=click_probability(signal, 1.0 - e_prime),
            wrong_prob=click_probability(signal, e_prime),
            dark_each=channel.dark_count_per_detector,
            record=scenario.record_log,
        )
        tallies, log = _collect(_run_shards(job, sizes, scenario.seed, workers), scenario.record_log)
        report = _report(tallies, True, None, baseline, honest=True)
        return SimulationRun(report=report, log=log)
