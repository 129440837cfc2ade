"""
Serializers for scenario configuration and emitted reports.

``ScenarioConfigSerializer`` validates a merged scenario (defaults, JSON
file, command-line flags) before any computation starts.
``ReportRecordSerializer`` checks the flat report records the command
emits, so that an emitted report re-parses into an equal record.
"""
import math

from rest_framework import serializers

from .domain import ChannelModel, StrategyParams, check_overlap
from .exceptions import QcaError
from .povm import TwoStateDiscriminator

SCHEMA_VERSION = '1'
COMMANDS = ('probe', 'sweep', 'simulate', 'monitor')


def _field_error(exc, default_field):
    return serializers.ValidationError({exc.field or default_field: exc.message})


class ScenarioConfigSerializer(serializers.Serializer):
    """
    Serializer for a simulation scenario.

    ``bob_mu`` and ``eve_mu`` accept a number or a regime name
    (``usd``, ``breidbart``/``min_error``; ``eve_mu`` also accepts ``bob``).
    Validated data carries the resolved numeric values, with the original
    spelling kept under ``bob_mu_name`` and ``eve_mu_name``.
    """

    w = serializers.FloatField()
    bob_mu = serializers.CharField()
    eve_mu = serializers.CharField()
    transmittance = serializers.FloatField()
    efficiency = serializers.FloatField()
    dark_count_prob = serializers.FloatField()
    pulses = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    intrinsic_error = serializers.FloatField(min_value=0.0, max_value=0.5)
    xi = serializers.FloatField(required=False, allow_null=True, min_value=0.0, max_value=1.0)
    zeta = serializers.FloatField(required=False, allow_null=True, min_value=0.0, max_value=0.5)
    fake_click_prob = serializers.FloatField(max_value=1.0)
    honest = serializers.BooleanField(required=False, default=False)

    def to_internal_value(self, data):
        if not isinstance(data, dict):
            raise serializers.ValidationError({'config': 'Expected a JSON object'})
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({unknown[0]: 'Unknown field'})
        return super().to_internal_value(data)

    def validate_w(self, value):
        try:
            return check_overlap(value)
        except QcaError as exc:
            raise serializers.ValidationError(exc.message)

    def validate_fake_click_prob(self, value):
        if not value > 0.0:
            raise serializers.ValidationError('fake_click_prob must be in (0, 1]')
        return value

    def validate(self, data):
        """
        Resolve both regimes and check every module precondition.

        The POVM constraint is checked for Bob's and Eve's mu; channel and
        strategy ranges are checked by building the domain records.
        """
        for name, value in data.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise serializers.ValidationError({name: 'Must be a finite number'})

        w = data['w']
        try:
            bob_mu = TwoStateDiscriminator.resolve_mu(w, data['bob_mu'])
            TwoStateDiscriminator.check_mu(w, bob_mu)
        except QcaError as exc:
            raise serializers.ValidationError({'bob_mu': exc.message})
        try:
            eve_mu = TwoStateDiscriminator.resolve_mu(w, data['eve_mu'], bob_mu=bob_mu)
            TwoStateDiscriminator.check_mu(w, eve_mu)
        except QcaError as exc:
            raise serializers.ValidationError({'eve_mu': exc.message})

        try:
            ChannelModel(
                transmittance=data['transmittance'],
                efficiency=data['efficiency'],
                dark_count_prob=data['dark_count_prob'],
                pulses=data['pulses'],
            )
            StrategyParams(
                mu=eve_mu,
                resend_throttle_xi=1.0 if data.get('xi') is None else data['xi'],
                flip_prob_zeta=0.0 if data.get('zeta') is None else data['zeta'],
                fake_click_prob=data['fake_click_prob'],
            )
        except QcaError as exc:
            raise _field_error(exc, 'config')

        data['bob_mu_name'] = data['bob_mu']
        data['eve_mu_name'] = data['eve_mu']
        data['bob_mu'] = bob_mu
        data['eve_mu'] = eve_mu
        return data


class ReportRecordSerializer(serializers.Serializer):
    """
    Serializer for a flat report record.

    A record is a JSON object with ``schema_version`` and ``command`` plus
    dotted keys whose values are finite numbers, booleans, strings or null.
    """

    def to_internal_value(self, data):
        if not isinstance(data, dict):
            raise serializers.ValidationError({'record': 'Expected a JSON object'})
        if data.get('schema_version') != SCHEMA_VERSION:
            raise serializers.ValidationError({'schema_version': f'Expected "{SCHEMA_VERSION}"'})
        if data.get('command') not in COMMANDS:
            raise serializers.ValidationError({'command': f'Expected one of {", ".join(COMMANDS)}'})

        record = {}
        for key, value in data.items():
            if not isinstance(key, str) or not key:
                raise serializers.ValidationError({'record': 'Keys must be non-empty strings'})
            if isinstance(value, float) and not math.isfinite(value):
                raise serializers.ValidationError({key: 'Numeric fields must be finite'})
            if value is not None and not isinstance(value, (bool, int, float, str)):
                raise serializers.ValidationError({key: 'Nested values are not allowed'})
            record[key] = value
        return record

    def to_representation(self, instance):
        return dict(instance)
