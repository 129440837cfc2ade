"""
``qca`` management command: probe, sweep, simulate and monitor.

Scenario values come from ``QCA['DEFAULT_SCENARIO']``, then an optional
JSON file (``--config``), then command-line flags; later sources win.

Exit codes: 0 success, 2 validation, 3 infeasible attack, 4 I/O or parse.
Failures are reported as a one-line JSON object
``{"error": ..., "field": ..., "detail": ...}``.
"""
import json
import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework.renderers import JSONRenderer

from attack.conf import get_config
from attack.exceptions import ClickLogFormatError, Infeasible, QcaError
from attack.reports import ReportBuilder, render_json
from attack.serializers import ScenarioConfigSerializer

logger = logging.getLogger('attack.commands')

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

# flag -> scenario field
SCENARIO_FLAGS = (
    ('--w', 'w'),
    ('--bob-mu', 'bob_mu'),
    ('--eve-mu', 'eve_mu'),
    ('--t', 'transmittance'),
    ('--eta', 'efficiency'),
    ('--dark', 'dark_count_prob'),
    ('--n', 'pulses'),
    ('--seed', 'seed'),
    ('--intrinsic-error', 'intrinsic_error'),
    ('--xi', 'xi'),
    ('--zeta', 'zeta'),
    ('--fake-click-prob', 'fake_click_prob'),
)


def _error_line(code, field, detail, **extra):
    payload = {'error': code, 'field': field, 'detail': detail, **extra}
    return JSONRenderer().render(payload).decode('utf-8')


def _first_error(detail):
    """(field, message) of the first entry in a DRF error structure."""
    field = None
    while isinstance(detail, (dict, list)):
        if isinstance(detail, dict):
            field, detail = next(iter(detail.items()))
        else:
            detail = detail[0]
    if field == 'non_field_errors':
        field = None
    return field, str(detail)


class Command(BaseCommand):
    help = 'Simulate quantum control attacks on two-state QKD and the countermeasures against them'
    requires_system_checks = []

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)

        probe = subparsers.add_parser('probe', help='Outcome probabilities and calibration for (w, eve_mu)')
        self._add_scenario_options(probe)

        sweep = subparsers.add_parser('sweep', help='CSV sweep of mu between the minimum-error and USD regimes')
        self._add_scenario_options(sweep)
        sweep.add_argument('--steps', default='50', help='Number of mu values (>= 2)')

        simulate = subparsers.add_parser('simulate', help='Seeded per-pulse simulation')
        self._add_scenario_options(simulate)
        simulate.add_argument('--log', dest='log_path', help='Write the per-pulse click log CSV here')
        simulate.add_argument('--honest', action='store_true', default=None,
                              help='Simulate the protocol without Eve')

        monitor = subparsers.add_parser('monitor', help='Run both countermeasures on a click log')
        self._add_scenario_options(monitor)
        monitor.add_argument('--log', dest='log_path', required=True, help='Click log CSV to analyse')

    @staticmethod
    def _add_scenario_options(parser):
        parser.add_argument('--config', dest='config_path', help='JSON scenario file')
        parser.add_argument('--out', dest='out_path', help='Also write the report to this file')
        for flag, field in SCENARIO_FLAGS:
            parser.add_argument(flag, dest=field, default=None)

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        try:
            config = self._load_config(options)
            if subcommand == 'probe':
                self._emit(render_json(ReportBuilder.probe(config)), options)
            elif subcommand == 'sweep':
                self._emit(ReportBuilder.sweep(config, self._steps(options['steps'])), options)
            elif subcommand == 'simulate':
                self._simulate(config, options)
            else:
                self._monitor(config, options)
        except Infeasible as exc:
            raise CommandError(_error_line(exc.code, exc.field, exc.message, kind=exc.kind),
                               returncode=EXIT_INFEASIBLE)
        except ClickLogFormatError as exc:
            raise CommandError(_error_line(exc.code, exc.field, exc.message), returncode=EXIT_IO)
        except QcaError as exc:
            raise CommandError(_error_line(exc.code, exc.field, exc.message), returncode=EXIT_VALIDATION)
        except OSError as exc:
            raise CommandError(_error_line('io_error', None, str(exc)), returncode=EXIT_IO)

    def _load_config(self, options):
        """
        Merge defaults, the JSON file and flags, then validate.

        Raises:
            CommandError: exit 4 for an unreadable file, exit 2 for invalid values
        """
        data = dict(get_config().default_scenario)
        path = options.get('config_path')
        if path:
            try:
                with open(path, encoding='utf-8') as handle:
                    file_data = json.load(handle)
            except OSError as exc:
                raise CommandError(_error_line('io_error', 'config', str(exc)), returncode=EXIT_IO)
            except ValueError as exc:
                raise CommandError(_error_line('parse_error', 'config', str(exc)), returncode=EXIT_IO)
            if not isinstance(file_data, dict):
                raise CommandError(_error_line('validation', 'config', 'Expected a JSON object'),
                                   returncode=EXIT_VALIDATION)
            data.update(file_data)

        for _, field in SCENARIO_FLAGS:
            if options.get(field) is not None:
                data[field] = options[field]
        if options.get('honest'):
            data['honest'] = True

        serializer = ScenarioConfigSerializer(data=data)
        if not serializer.is_valid():
            field, detail = _first_error(serializer.errors)
            raise CommandError(_error_line('validation', field, detail), returncode=EXIT_VALIDATION)
        logger.debug('Validated scenario: %s', serializer.validated_data)
        return dict(serializer.validated_data)

    @staticmethod
    def _steps(value):
        try:
            steps = int(value)
        except (TypeError, ValueError):
            steps = 0
        if steps < 2:
            raise CommandError(_error_line('validation', 'steps', 'steps must be an integer >= 2'),
                               returncode=EXIT_VALIDATION)
        return steps

    def _simulate(self, config, options):
        log_path = options.get('log_path')
        if log_path:
            with open(log_path, 'w', encoding='utf-8', newline='') as log_stream:
                record, failure = ReportBuilder.simulate(config, log_stream)
        else:
            record, failure = ReportBuilder.simulate(config)
        self._emit(render_json(record), options)
        if failure is not None:
            raise failure

    def _monitor(self, config, options):
        with open(options['log_path'], encoding='utf-8', newline='') as log_stream:
            record = ReportBuilder.monitor(config, log_stream)
        self._emit(render_json(record), options)

    def _emit(self, text, options):
        out_path = options.get('out_path')
        if out_path:
            with open(out_path, 'w', encoding='utf-8', newline='') as handle:
                handle.write(text)
        self.stdout.write(text, ending='')

