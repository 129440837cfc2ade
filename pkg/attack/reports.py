"""
Report assembly for the ``qca`` command.

Each builder turns a validated scenario into a flat record of dotted keys
(``probe.p_correct``, ``report.bob_clicks`` ...) headed by
``schema_version`` and ``command``. Records are rendered with DRF's
``JSONRenderer``; sweep rows are rendered as CSV.
"""
import csv
import io
import logging
from dataclasses import asdict

import numpy as np
from rest_framework.renderers import JSONRenderer

from .clicklog import read_csv, write_csv
from .conf import get_config
from .countermeasures import DetectorMonitor
from .domain import ChannelModel, MonitorConfig, Scenario, StrategyParams
from .exceptions import Infeasible, InsufficientData
from .operators import hermitian_eig
from .povm import TwoStateDiscriminator
from .serializers import SCHEMA_VERSION
from .simulation import AttackSimulator

logger = logging.getLogger(__name__)

SWEEP_HEADER = ('mu', 'p_correct', 'p_error', 'p_inconclusive', 'ge_per_pulse', 'feasible', 'zeta')


def format_float(value):
    """17 significant digits, locale independent."""
    return format(float(value), '.17g')


def render_json(record):
    """Indented JSON text with a trailing newline."""
    return JSONRenderer().render(record, renderer_context={'indent': 2}).decode('utf-8') + '\n'


def channel_from(config):
    return ChannelModel(
        transmittance=config['transmittance'],
        efficiency=config['efficiency'],
        dark_count_prob=config['dark_count_prob'],
        pulses=config['pulses'],
    )


def baseline_from(config):
    return AttackSimulator.baseline_stats(
        channel_from(config), config['bob_mu'], config['w'], config['intrinsic_error'],
    )


def _header(command):
    return {'schema_version': SCHEMA_VERSION, 'command': command}


def _scenario_keys(config):
    return {
        'scenario.w': config['w'],
        'scenario.bob_mu': config['bob_mu'],
        'scenario.bob_mu_name': str(config['bob_mu_name']),
        'scenario.eve_mu': config['eve_mu'],
        'scenario.eve_mu_name': str(config['eve_mu_name']),
        'scenario.transmittance': config['transmittance'],
        'scenario.efficiency': config['efficiency'],
        'scenario.dark_count_prob': config['dark_count_prob'],
        'scenario.pulses': config['pulses'],
        'scenario.seed': config['seed'],
        'scenario.intrinsic_error': config['intrinsic_error'],
    }


def _baseline_keys(baseline):
    return {
        'baseline.gain_gb': baseline.gain_gb,
        'baseline.qber_eb': baseline.qber_eb,
        'baseline.gain_per_pulse': baseline.gain_per_pulse,
    }


def _prefixed(prefix, data):
    return {f'{prefix}.{key}': value for key, value in data.items()}


def _plain(record):
    """Python scalars only, so rendering does not depend on NumPy types."""
    plain = {}
    for key, value in record.items():
        if isinstance(value, np.generic):
            value = value.item()
        plain[key] = value
    return plain


class ReportBuilder:
    """
    Service class assembling report records for each subcommand.

    Provides methods to:
    - Probe one (w, eve_mu) point: closed form, Born rule, calibration, strategy comparison
    - Sweep mu and render CSV rows
    - Run a simulation (matched, overridden or honest) and optionally write its click log
    - Run both monitors on a click log
    """

    @staticmethod
    def probe(config):
        """
        Closed-form and Born-rule outcome probabilities with calibration data.

        Also assesses the named strategies and reports the largest-gain
        matchable mu as ``strategy.best_mu`` (null when none matches).

        Returns:
            dict: flat report record
        """
        w, mu = config['w'], config['eve_mu']
        closed = TwoStateDiscriminator.outcome_probs_closed_form(w, mu)
        povm = TwoStateDiscriminator.build_povm(w, mu)
        pair = TwoStateDiscriminator.embed_states(w)
        born = TwoStateDiscriminator.outcome_probs_born(povm, pair, 0)
        residual = max(abs(a - b) for a, b in zip(closed.as_tuple(), born.as_tuple()))
        lambda_max = hermitian_eig(povm.a_u + povm.a_v).max_eigenvalue
        lambda_uncalibrated = hermitian_eig(
            TwoStateDiscriminator.detection_operator(w, mu, delta=1.0)
        ).max_eigenvalue

        record = _header('probe')
        record.update(_scenario_keys(config))
        record.update({
            'probe.constraint_margin': TwoStateDiscriminator.positivity_margin(w, mu),
            'probe.constraint_ok': True,
            'probe.delta': povm.params.delta,
            'probe.lambda_max': lambda_max,
            'probe.lambda_max_uncalibrated': lambda_uncalibrated,
            'probe.p_inconclusive_direct': TwoStateDiscriminator.inconclusive_closed_form(w, mu),
            'probe.born_residual': residual,
        })
        record.update(_prefixed('closed', closed.to_dict()))
        record.update(_prefixed('born', born.to_dict()))

        baseline = baseline_from(config)
        record.update(_baseline_keys(baseline))
        for assessment in AttackSimulator.compare_strategies(w, config['bob_mu'], baseline, config['pulses']):
            data = asdict(assessment)
            name = data.pop('name')
            data['viable'] = assessment.viable
            record.update(_prefixed(f'strategy.{name}', data))
        try:
            best_mu = AttackSimulator.choose_mu(w, baseline, config['pulses'])
            status = 'ok'
        except Infeasible as exc:
            best_mu, status = None, f'infeasible_{exc.kind}'
        record['strategy.best_mu'] = best_mu
        record['strategy.best_mu_status'] = status
        return _plain(record)

    @staticmethod
    def sweep(config, steps):
        """
        CSV text, one row per mu on linspace(mu_breidbart, w, steps).

        Infeasible zeta is written as ``infeasible``; mu values outside the
        valid region are skipped.
        """
        w = config['w']
        grid = np.linspace(TwoStateDiscriminator.special_mu(w, 'breidbart'), w, steps)
        records = AttackSimulator.sweep_feasibility(w, grid, baseline_from(config), config['pulses'])

        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(SWEEP_HEADER)
        for record in records:
            if not record.valid:
                logger.warning('Skipping mu=%s outside the valid region', record.mu)
                continue
            writer.writerow((
                format_float(record.mu),
                format_float(record.probs.p_correct),
                format_float(record.probs.p_error),
                format_float(record.probs.p_inconclusive),
                format_float(record.ge / config['pulses']),
                'true' if record.feasible else 'false',
                'infeasible' if record.zeta is None else format_float(record.zeta),
            ))
        return out.getvalue()

    @staticmethod
    def simulate(config, log_stream=None):
        """
        Run the configured simulation.

        Explicit xi/zeta win; otherwise they come from ``solve_matching``.
        When matching is infeasible the attack still runs unmatched
        (xi = 1, zeta = 0) and the returned error is set.

        Args:
            config (dict): validated scenario
            log_stream: text stream for the click log CSV, or None

        Returns:
            tuple: (record, Infeasible or None)
        """
        channel = channel_from(config)
        baseline = baseline_from(config)
        record = _header('simulate')
        record.update(_scenario_keys(config))
        record.update(_baseline_keys(baseline))

        failure = None
        xi, zeta = config.get('xi'), config.get('zeta')
        if config.get('honest'):
            status = 'honest'
        elif xi is not None and zeta is not None:
            status = 'override'
        else:
            try:
                matched = AttackSimulator.solve_matching(
                    config['w'], config['eve_mu'], baseline, config['pulses'], config['fake_click_prob'],
                )
                xi = matched.resend_throttle_xi if xi is None else xi
                zeta = matched.flip_prob_zeta if zeta is None else zeta
                status = 'matched'
            except Infeasible as exc:
                logger.warning('Matching infeasible (%s): %s', exc.kind, exc.message)
                failure = exc
                xi = 1.0 if xi is None else xi
                zeta = 0.0 if zeta is None else zeta
                status = f'infeasible_{exc.kind}'

        strategy = StrategyParams(
            mu=config['eve_mu'],
            resend_throttle_xi=1.0 if xi is None else xi,
            flip_prob_zeta=0.0 if zeta is None else zeta,
            fake_click_prob=config['fake_click_prob'],
        )
        scenario = Scenario(
            w=config['w'],
            channel=channel,
            bob_mu=config['bob_mu'],
            strategy=strategy,
            seed=config['seed'],
            intrinsic_error=config['intrinsic_error'],
            record_log=log_stream is not None,
        )
        if config.get('honest'):
            run = AttackSimulator.simulate_honest(scenario)
        else:
            run = AttackSimulator.simulate(scenario)
            record.update({
                'strategy.mu': strategy.mu,
                'strategy.xi': strategy.resend_throttle_xi,
                'strategy.zeta': strategy.flip_prob_zeta,
                'strategy.fake_click_prob': strategy.fake_click_prob,
            })
        record['matching.status'] = status

        report = run.report.to_dict()
        if failure is not None:
            report['feasibility'] = False
        record.update(_prefixed('report', report))
        if log_stream is not None:
            write_csv(run.log, log_stream)
        return _plain(record), failure

    @staticmethod
    def monitor(config, log_stream, monitor_config=None):
        """
        Both monitor verdicts for a click log.

        A monitor without enough data is reported as
        ``<monitor>.status = insufficient_data``.

        Raises:
            ClickLogFormatError: on a malformed log
        """
        if monitor_config is None:
            monitor_config = MonitorConfig(**get_config().monitor)
        log = read_csv(log_stream)
        baseline = baseline_from(config)

        record = _header('monitor')
        record.update(_scenario_keys(config))
        record.update(_baseline_keys(baseline))
        record.update({
            'monitor.slots': len(log),
            'monitor.window_size': monitor_config.window_size,
        })
        checks = (
            ('monitor.rate', lambda: DetectorMonitor.click_statistics_monitor(
                log, monitor_config, baseline.gain_per_pulse)),
            ('monitor.coincidence', lambda: DetectorMonitor.coincidence_monitor(log, monitor_config)),
        )
        for prefix, check in checks:
            try:
                verdict = check()
            except InsufficientData as exc:
                logger.warning('%s: %s', prefix, exc.message)
                record[f'{prefix}.status'] = 'insufficient_data'
                continue
            record[f'{prefix}.status'] = 'flagged' if verdict.flagged else 'ok'
            record.update(_prefixed(prefix, verdict.to_dict()))
        return _plain(record)
