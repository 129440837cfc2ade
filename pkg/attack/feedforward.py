"""
Eve's post-measurement machinery.

Kraus operators are factored as K_x = V_x sqrt(A_x): the PSD root carries
the measurement, the unitary V_x re-prepares the channel state according
to the outcome. On the channel side the re-preparation is represented
operationally by ``FeedForwardAction``:

- inconclusive -> vacuum (the slot is blocked)
- conclusive   -> a bright faked state carrying the measured label,
                  possibly flipped (zeta) or throttled to a block (xi)
"""
import logging
from dataclasses import dataclass

import numpy as np

from .conf import get_config
from .domain import (
    FeedForwardAction,
    KrausRecord,
    KrausSet,
    Outcome,
    PostMeasurementState,
    StateLabel,
    TwoStatePovm,
)
from .exceptions import NotPsd, NotUnitary, ZeroProbabilityOutcome
from .operators import as_matrix, is_unitary, max_abs, psd_sqrt
from .povm import TwoStateDiscriminator

logger = logging.getLogger(__name__)

NO_BIT = -1


@dataclass(frozen=True)
class FeedForwardBatch:
    """Vectorized feed-forward decisions; ``bits`` is NO_BIT on blocked slots."""

    resend: np.ndarray
    bits: np.ndarray
    flips: np.ndarray


def _joint_vector(joint_state):
    """A joint state given as (channel, ancilla) or as a flat tensor-product vector."""
    if isinstance(joint_state, tuple):
        channel, ancilla = joint_state
        return np.kron(np.asarray(channel, dtype=np.complex128),
                       np.asarray(ancilla, dtype=np.complex128))
    return np.asarray(joint_state, dtype=np.complex128).reshape(-1)


class FeedForwardController:
    """
    Service class for Kraus factorization and Eve's re-preparation.

    Provides methods to:
    - Build Kraus operators from POVM elements and feed-forward unitaries
    - Compute Eve's normalized post-measurement ancilla states
    - Decide block/resend/flip per slot from a seeded random stream
    - Check that a joint unitary preserves overlaps
    """

    @staticmethod
    def kraus_from_povm(povm, unitaries=None):
        """
        Kraus operators K_x = V_x sqrt(A_x) for every outcome.

        Args:
            povm: TwoStatePovm, or a mapping label -> PSD element
            unitaries (dict, optional): label -> unitary V_x; identity when absent

        Returns:
            KrausSet

        Raises:
            NotPsd: if the elements do not form a valid POVM
            NotUnitary: if a supplied V_x is not unitary within ``UNITARY_TOL``
        """
        config = get_config()
        elements = povm.elements() if isinstance(povm, TwoStatePovm) else dict(povm)
        report = TwoStateDiscriminator.validate_povm(elements)
        if not report.passed:
            raise NotPsd(
                f'elements do not form a POVM (completeness residual '
                f'{report.completeness_residual:.3e}, min eigenvalue {min(report.min_eigenvalues):.3e})'
            )
        unitaries = unitaries or {}

        records = []
        for label, element in elements.items():
            root = psd_sqrt(element)
            dim = root.shape[0]
            unitary = as_matrix(unitaries.get(label, np.eye(dim)))
            if not is_unitary(unitary, config.unitary_tol):
                raise NotUnitary(f'feed-forward operator for outcome {label!r} is not unitary',
                                 field=str(label))
            records.append(KrausRecord(
                label=label,
                kraus=unitary @ root,
                unitary_factor=unitary,
                psd_root=root,
            ))

        kraus_set = KrausSet(records=tuple(records))
        residual = max_abs(kraus_set.completeness() - np.eye(records[0].kraus.shape[0]))
        if residual > config.sqrt_tol:
            logger.warning('Kraus set completeness residual %.3e exceeds %.1e', residual, config.sqrt_tol)
        return kraus_set

    @staticmethod
    def post_measurement_state(povm, pair, sent, outcome):
        """
        Eve's normalized ancilla after observing ``outcome``.

            sqrt(A) |psi_sent> / sqrt(P(outcome | sent))

        Raises:
            ZeroProbabilityOutcome: if the outcome cannot occur for ``sent``
        """
        sent = StateLabel(sent)
        outcome = Outcome(outcome)
        element = povm.element_for(sent, outcome)
        psi = pair.state(sent)
        prob = float(np.real(np.vdot(psi, element @ psi)))
        if prob <= get_config().zero_prob_tol:
            raise ZeroProbabilityOutcome(
                f'outcome {outcome.label} has probability {prob:.3e} when {sent.name.lower()} is sent',
                field='outcome',
            )
        state = psd_sqrt(element) @ psi / np.sqrt(prob)
        return PostMeasurementState(outcome=outcome, eve_state=state, norm_prob=prob)

    @staticmethod
    def feed_forward_batch(outcomes, measured, strategy, rng):
        """
        Feed-forward decisions for a block of slots.

        One throttle uniform and one flip uniform are drawn per slot, in
        that order, whatever the outcome.

        Args:
            outcomes (ndarray): Outcome codes per slot
            measured (ndarray): Eve's measured label per slot (0 = u, 1 = v)
            strategy (StrategyParams): xi and zeta
            rng (numpy.random.Generator): caller's seeded stream

        Returns:
            FeedForwardBatch
        """
        outcomes = np.asarray(outcomes)
        measured = np.asarray(measured, dtype=np.int8)
        n = outcomes.shape[0]
        throttle = rng.random(n)
        flip_draw = rng.random(n)

        conclusive = outcomes != Outcome.INCONCLUSIVE
        resend = conclusive & (throttle < strategy.resend_throttle_xi)
        flips = resend & (flip_draw < strategy.flip_prob_zeta)
        bits = np.where(flips, 1 - measured, measured).astype(np.int8)
        bits[~resend] = NO_BIT
        return FeedForwardBatch(resend=resend, bits=bits, flips=flips)

    @staticmethod
    def feed_forward(outcome, measured_label, strategy, rng):
        """
        Feed-forward decision for a single slot.

        Returns:
            FeedForwardAction: vacuum with scale 0 for blocked slots, otherwise
            the label to resend at the blinding amplitude
        """
        batch = FeedForwardController.feed_forward_batch(
            np.array([int(outcome)]), np.array([int(measured_label)]), strategy, rng,
        )
        if not batch.resend[0]:
            return FeedForwardAction(resend_label=None, amplitude_scale=0.0, flip=False)
        return FeedForwardAction(
            resend_label=StateLabel(int(batch.bits[0])),
            amplitude_scale=get_config().blinding_amplitude,
            flip=bool(batch.flips[0]),
        )

    @staticmethod
    def apply_joint(unitary, joint_state):
        """Apply a unitary on the channel (x) ancilla space to a joint state."""
        return as_matrix(unitary) @ _joint_vector(joint_state)

    @staticmethod
    def overlap_preservation_check(before, after):
        """
        |<a_1|a_2> - <b_1|b_2>| for two joint states before and after.

        Args:
            before: pair of joint states, each (channel, ancilla) or a flat vector
            after: pair of joint states in the same form

        Returns:
            float: residual; at rounding level when one unitary acted on both
        """
        a1, a2 = (_joint_vector(s) for s in before)
        b1, b2 = (_joint_vector(s) for s in after)
        return float(abs(np.vdot(a1, a2) - np.vdot(b1, b2)))
