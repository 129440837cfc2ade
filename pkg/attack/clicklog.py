"""
Per-pulse click log and its CSV representation.

One row per pulse slot:

    pulse_index,alice_bit,eve_outcome,action,bob_click,bob_bit,detector_a_click,detector_b_click

``eve_outcome`` is correct/error/inconclusive (``none`` without Eve),
``action`` is resend/block/pass, booleans are ``0``/``1`` and ``bob_bit``
is empty when Bob saw no click. Detector A reports bit 0, detector B bit 1.
"""
import csv
import logging
from dataclasses import dataclass

import numpy as np

from .domain import Action, Outcome
from .exceptions import ClickLogFormatError
from .feedforward import NO_BIT

logger = logging.getLogger(__name__)

CSV_HEADER = (
    'pulse_index', 'alice_bit', 'eve_outcome', 'action',
    'bob_click', 'bob_bit', 'detector_a_click', 'detector_b_click',
)

NO_EVE = -1

_OUTCOME_NAMES = {NO_EVE: 'none', **{o.value: o.label for o in Outcome}}
_OUTCOME_CODES = {name: code for code, name in _OUTCOME_NAMES.items()}
_ACTION_NAMES = {a.value: a.label for a in Action}
_ACTION_CODES = {name: code for code, name in _ACTION_NAMES.items()}


@dataclass(frozen=True)
class ClickLog:
    """Column arrays of equal length, one entry per pulse slot."""

    alice_bit: np.ndarray
    eve_outcome: np.ndarray
    action: np.ndarray
    bob_click: np.ndarray
    bob_bit: np.ndarray
    detector_a: np.ndarray
    detector_b: np.ndarray

    def __len__(self):
        return int(self.alice_bit.shape[0])

    @property
    def double_clicks(self):
        return self.detector_a & self.detector_b

    def head(self, n):
        """The first ``n`` slots."""
        return ClickLog(**{name: getattr(self, name)[:n] for name in self.__dataclass_fields__})

    @classmethod
    def concatenate(cls, logs):
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(**{
            name: np.concatenate([getattr(log, name) for log in logs])
            for name in cls.__dataclass_fields__
        })

    @classmethod
    def empty(cls):
        return cls(
            alice_bit=np.zeros(0, dtype=np.int8),
            eve_outcome=np.zeros(0, dtype=np.int8),
            action=np.zeros(0, dtype=np.int8),
            bob_click=np.zeros(0, dtype=bool),
            bob_bit=np.zeros(0, dtype=np.int8),
            detector_a=np.zeros(0, dtype=bool),
            detector_b=np.zeros(0, dtype=bool),
        )


def write_csv(log, stream):
    """Write ``log`` to a text stream, LF line endings."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    columns = zip(
        log.alice_bit.tolist(),
        log.eve_outcome.tolist(),
        log.action.tolist(),
        log.bob_click.tolist(),
        log.bob_bit.tolist(),
        log.detector_a.tolist(),
        log.detector_b.tolist(),
    )
    for index, (alice, outcome, action, click, bit, det_a, det_b) in enumerate(columns):
        writer.writerow((
            index,
            alice,
            _OUTCOME_NAMES[outcome],
            _ACTION_NAMES[action],
            int(click),
            '' if bit == NO_BIT else bit,
            int(det_a),
            int(det_b),
        ))
    logger.debug('Wrote click log with %d rows', len(log))


def _flag(value, column, line):
    if value not in ('0', '1'):
        raise ClickLogFormatError(f'line {line}: {column} must be 0 or 1, got {value!r}', field=column)
    return value == '1'


def read_csv(stream):
    """
    Parse a click log written by ``write_csv``.

    Args:
        stream: text stream positioned at the header

    Returns:
        ClickLog

    Raises:
        ClickLogFormatError: on undecodable text, a wrong header, a short or
            long row, an unknown label, an out-of-order pulse index or a
            bob_bit that disagrees with the detector columns
    """
    reader = csv.reader(stream)
    try:
        header = next(reader, None)
        rows = list(reader)
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ClickLogFormatError(f'unreadable click log: {exc}', field='row')
    if header is None or tuple(header) != CSV_HEADER:
        raise ClickLogFormatError(f'unexpected click log header {header!r}', field='header')

    alice, outcomes, actions, clicks, bits, det_a, det_b = ([] for _ in range(7))
    for line, row in enumerate(rows, start=2):
        if len(row) != len(CSV_HEADER):
            raise ClickLogFormatError(
                f'line {line}: expected {len(CSV_HEADER)} columns, got {len(row)}', field='row',
            )
        index, a_bit, outcome, action, click, bit, a_click, b_click = row
        if index != str(len(alice)):
            raise ClickLogFormatError(f'line {line}: pulse_index {index!r} out of sequence',
                                      field='pulse_index')
        if a_bit not in ('0', '1'):
            raise ClickLogFormatError(f'line {line}: alice_bit must be 0 or 1', field='alice_bit')
        if outcome not in _OUTCOME_CODES:
            raise ClickLogFormatError(f'line {line}: unknown eve_outcome {outcome!r}', field='eve_outcome')
        if action not in _ACTION_CODES:
            raise ClickLogFormatError(f'line {line}: unknown action {action!r}', field='action')
        clicked = _flag(click, 'bob_click', line)
        fired_a = _flag(a_click, 'detector_a_click', line)
        fired_b = _flag(b_click, 'detector_b_click', line)
        if clicked != (fired_a or fired_b):
            raise ClickLogFormatError(f'line {line}: bob_click disagrees with detectors', field='bob_click')
        if clicked:
            if bit not in ('0', '1'):
                raise ClickLogFormatError(f'line {line}: bob_bit missing for a click', field='bob_bit')
            if fired_a != fired_b and int(bit) != (0 if fired_a else 1):
                raise ClickLogFormatError(f'line {line}: bob_bit disagrees with detectors', field='bob_bit')
        elif bit != '':
            raise ClickLogFormatError(f'line {line}: bob_bit set without a click', field='bob_bit')

        alice.append(int(a_bit))
        outcomes.append(_OUTCOME_CODES[outcome])
        actions.append(_ACTION_CODES[action])
        clicks.append(clicked)
        bits.append(int(bit) if clicked else NO_BIT)
        det_a.append(fired_a)
        det_b.append(fired_b)

    logger.debug('Read click log with %d rows', len(alice))
    return ClickLog(
        alice_bit=np.array(alice, dtype=np.int8),
        eve_outcome=np.array(outcomes, dtype=np.int8),
        action=np.array(actions, dtype=np.int8),
        bob_click=np.array(clicks, dtype=bool),
        bob_bit=np.array(bits, dtype=np.int8),
        detector_a=np.array(det_a, dtype=bool),
        detector_b=np.array(det_b, dtype=bool),
    )
