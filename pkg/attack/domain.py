"""
Immutable domain records for the quantum control attack toolkit.

Records validate their own ranges on construction and raise
``OutOfRange`` naming the offending field.
"""
import enum
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import OutOfRange


class StateLabel(enum.IntEnum):
    """Alice's two signal states; the integer value is the key bit."""

    U = 0
    V = 1

    @property
    def other(self):
        """The opposite state label."""
        return StateLabel(1 - self.value)


class Outcome(enum.IntEnum):
    """Outcome of a two-state discrimination, relative to the state sent."""

    CORRECT = 0
    ERROR = 1
    INCONCLUSIVE = 2

    @property
    def label(self):
        """Lower-case name, as written in reports and click logs."""
        return self.name.lower()


class Action(enum.IntEnum):
    """What reaches Bob's receiver in a pulse slot."""

    RESEND = 0
    BLOCK = 1
    PASS = 2

    @property
    def label(self):
        """Lower-case name, as written in reports and click logs."""
        return self.name.lower()


def check_range(name, value, low, high, low_open=False, high_open=False):
    """Raise ``OutOfRange`` unless ``value`` is finite and inside the given interval."""
    if value is None or not math.isfinite(value):
        raise OutOfRange(f'{name} must be a finite number', field=name)
    too_low = value <= low if low_open else value < low
    too_high = value >= high if high_open else value > high
    if too_low or too_high:
        left = '(' if low_open else '['
        right = ')' if high_open else ']'
        raise OutOfRange(f'{name}={value!r} outside {left}{low}, {high}{right}', field=name)


def check_overlap(w):
    """Validate a state overlap w in [0, 1)."""
    check_range('w', w, 0.0, 1.0, high_open=True)
    return float(w)


@dataclass(frozen=True)
class StatePair:
    """Two unit vectors with real overlap ``overlap_w``."""

    overlap_w: float
    psi_u: np.ndarray
    psi_v: np.ndarray

    def state(self, label):
        """
        Vector for ``label``.

        Args:
            label: a ``StateLabel`` or its integer bit

        Returns:
            ndarray: ``psi_u`` for U, ``psi_v`` for V
        """
        return self.psi_u if StateLabel(label) is StateLabel.U else self.psi_v


@dataclass(frozen=True)
class PovmParams:
    mu: float
    delta: float
    w: float


@dataclass(frozen=True)
class TwoStatePovm:
    """The three-outcome POVM {A_u, A_v, A_?}."""

    a_u: np.ndarray
    a_v: np.ndarray
    a_inconclusive: np.ndarray
    params: PovmParams

    def elements(self):
        """Elements keyed by outcome symbol: 'u', 'v' and '?'."""
        return {'u': self.a_u, 'v': self.a_v, '?': self.a_inconclusive}

    def element_for(self, sent, outcome):
        """POVM element that yields ``outcome`` when ``sent`` was transmitted."""
        sent = StateLabel(sent)
        outcome = Outcome(outcome)
        if outcome is Outcome.INCONCLUSIVE:
            return self.a_inconclusive
        guessed = sent if outcome is Outcome.CORRECT else sent.other
        return self.a_u if guessed is StateLabel.U else self.a_v


@dataclass(frozen=True)
class OutcomeProbs:
    """Conditional outcome probabilities given one sent state."""

    p_correct: float
    p_error: float
    p_inconclusive: float

    @property
    def conclusive(self):
        """Probability of a conclusive outcome."""
        return self.p_correct + self.p_error

    @property
    def conditional_error(self):
        """Error fraction among conclusive outcomes (0 when nothing is conclusive)."""
        conclusive = self.conclusive
        return self.p_error / conclusive if conclusive > 0 else 0.0

    def as_tuple(self):
        return (self.p_correct, self.p_error, self.p_inconclusive)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PovmValidationReport:
    completeness_residual: float
    min_eigenvalues: Tuple[float, ...]
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class KrausRecord:
    label: str
    kraus: np.ndarray
    unitary_factor: np.ndarray
    psd_root: np.ndarray


@dataclass(frozen=True)
class KrausSet:
    records: Tuple[KrausRecord, ...]

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, label):
        for record in self.records:
            if record.label == label:
                return record
        raise KeyError(label)

    def completeness(self):
        """Sum over outcomes of K^dagger K."""
        total = None
        for record in self.records:
            term = record.kraus.conj().T @ record.kraus
            total = term if total is None else total + term
        return total


@dataclass(frozen=True)
class PostMeasurementState:
    outcome: Outcome
    eve_state: np.ndarray
    norm_prob: float


@dataclass(frozen=True)
class FeedForwardAction:
    """
    Eve's re-preparation decision for one slot.

    ``resend_label`` is None for the vacuum (blocked slot).
    """

    resend_label: Optional[StateLabel]
    amplitude_scale: float
    flip: bool

    @property
    def blocked(self):
        """True for a vacuum slot."""
        return self.resend_label is None


@dataclass(frozen=True)
class ChannelModel:
    """Alice-to-Bob channel and Bob's detector, per gate."""

    transmittance: float
    efficiency: float
    dark_count_prob: float
    pulses: int

    def __post_init__(self):
        check_range('transmittance', self.transmittance, 0.0, 1.0, low_open=True)
        check_range('efficiency', self.efficiency, 0.0, 1.0, low_open=True)
        check_range('dark_count_prob', self.dark_count_prob, 0.0, 1.0, high_open=True)
        if int(self.pulses) != self.pulses or self.pulses < 1:
            raise OutOfRange(f'pulses={self.pulses!r} must be a positive integer', field='pulses')

    @property
    def dark_count_per_detector(self):
        """Per-detector dark probability such that P(any of two detectors fires) = dark_count_prob."""
        return 1.0 - math.sqrt(1.0 - self.dark_count_prob)


@dataclass(frozen=True)
class StrategyParams:
    """Eve's knobs: POVM regime, resend throttle xi, flip probability zeta."""

    mu: float
    resend_throttle_xi: float = 1.0
    flip_prob_zeta: float = 0.0
    fake_click_prob: float = 1.0

    def __post_init__(self):
        check_range('mu', self.mu, 0.0, 1.0)
        check_range('xi', self.resend_throttle_xi, 0.0, 1.0)
        check_range('zeta', self.flip_prob_zeta, 0.0, 0.5)
        check_range('fake_click_prob', self.fake_click_prob, 0.0, 1.0, low_open=True)


@dataclass(frozen=True)
class BaselineStats:
    """What Bob expects to observe without Eve."""

    gain_gb: float
    qber_eb: float
    pulses: int
    dark_count_prob: float = 0.0

    @property
    def gain_per_pulse(self):
        """Bob's click probability per gate."""
        return self.gain_gb / self.pulses


@dataclass(frozen=True)
class SimulationTallies:
    """Additive per-shard counters."""

    pulses: int = 0
    correct: int = 0
    error: int = 0
    inconclusive: int = 0
    resends: int = 0
    blocks: int = 0
    flips: int = 0
    fake_clicks: int = 0
    dark_clicks: int = 0
    bob_clicks: int = 0
    bob_errors: int = 0
    double_clicks: int = 0

    def __add__(self, other):
        return SimulationTallies(**{
            name: getattr(self, name) + getattr(other, name)
            for name in self.__dataclass_fields__
        })


@dataclass(frozen=True)
class SimulationReport:
    tallies: SimulationTallies
    eve_gain_ge: int
    bob_clicks: int
    bob_errors: int
    observed_qber: float
    feasibility: bool
    eve_key_knowledge_fraction: float
    strategy: Optional[StrategyParams] = None
    baseline: Optional[BaselineStats] = None
    honest: bool = False

    def to_dict(self):
        data = {
            'eve_gain_ge': self.eve_gain_ge,
            'bob_clicks': self.bob_clicks,
            'bob_errors': self.bob_errors,
            'observed_qber': self.observed_qber,
            'feasibility': self.feasibility,
            'eve_key_knowledge_fraction': self.eve_key_knowledge_fraction,
            'honest': self.honest,
        }
        data.update({f'tally_{k}': v for k, v in asdict(self.tallies).items()})
        return data


@dataclass(frozen=True)
class SweepRecord:
    mu: float
    valid: bool
    probs: Optional[OutcomeProbs] = None
    ge: Optional[float] = None
    feasible: bool = False
    e_e: Optional[float] = None
    zeta: Optional[float] = None


@dataclass(frozen=True)
class StrategyAssessment:
    name: str
    mu: float
    ge: float
    rate_feasible: bool
    e_e: float
    error_feasible: bool

    @property
    def viable(self):
        return self.rate_feasible and self.error_feasible


@dataclass(frozen=True)
class MonitorConfig:
    window_size: int = 10000
    rate_threshold: float = 4.0
    coincidence_threshold: float = 4.0

    def __post_init__(self):
        if int(self.window_size) != self.window_size or self.window_size < 100:
            raise OutOfRange('window_size must be an integer >= 100', field='window_size')
        check_range('rate_threshold', self.rate_threshold, 0.0, math.inf, low_open=True, high_open=True)
        check_range(
            'coincidence_threshold', self.coincidence_threshold, 0.0, math.inf,
            low_open=True, high_open=True,
        )


@dataclass(frozen=True)
class MonitorVerdict:
    flagged: bool
    statistic: float
    threshold: float
    window_count: int
    z_score: float = 0.0
    p_value: float = 1.0
    observed: float = 0.0
    expected: float = 0.0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation run needs; ``seed`` is the master seed."""

    w: float
    channel: ChannelModel
    bob_mu: float
    strategy: StrategyParams
    seed: int = 0
    intrinsic_error: float = 0.01
    record_log: bool = False

    def __post_init__(self):
        check_overlap(self.w)
        check_range('intrinsic_error', self.intrinsic_error, 0.0, 0.5)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise OutOfRange('seed must be an unsigned 64-bit integer', field='seed')
