"""
Two-state discrimination: state embedding and the mu/delta POVM family.

The two states are embedded as real vectors

    psi_u = (1, 0),    psi_v = (w, sqrt(1 - w^2))

so every operator is a concrete 2x2 matrix. The POVM elements are

    A_u = |phi_u><phi_u| / delta,   phi_u = psi_u - mu * psi_v
    A_v = |phi_v><phi_v| / delta,   phi_v = mu * psi_u - psi_v
    A_? = I - A_u - A_v

with delta = (1 - w)(1 + mu)^2, the value for which the largest eigenvalue
of A_u + A_v equals 1. A_v is built from phi_v; building it from phi_u
would make completeness and the outcome probabilities unsatisfiable.
"""
import logging
import math

import numpy as np

from .conf import get_config
from .domain import (
    OutcomeProbs,
    PovmParams,
    PovmValidationReport,
    StateLabel,
    StatePair,
    TwoStatePovm,
    check_overlap,
)
from .exceptions import ConstraintViolated, DimensionMismatch, NotHermitian, OutOfRange
from .operators import as_matrix, hermitian_eig, max_abs, projector

logger = logging.getLogger(__name__)

SPECIAL_MU_KINDS = ('usd', 'min_error', 'breidbart')


def _readonly(array):
    array.setflags(write=False)
    return array


class TwoStateDiscriminator:
    """
    Service class for the two-state POVM family.

    Provides methods to:
    - Embed the overlap w as concrete state vectors
    - Calibrate delta and assemble the POVM for a regime mu
    - Evaluate outcome probabilities in closed form and by the Born rule
    - Resolve the special regimes (USD, minimum-error) and validate POVMs
    """

    @staticmethod
    def embed_states(w):
        """
        Embed two states with overlap ``w`` in C^2.

        Args:
            w (float): overlap <psi_u|psi_v>, in [0, 1)

        Returns:
            StatePair

        Raises:
            OutOfRange: for w outside [0, 1)
        """
        w = check_overlap(w)
        psi_u = np.array([1.0, 0.0], dtype=np.complex128)
        psi_v = np.array([w, math.sqrt(1.0 - w * w)], dtype=np.complex128)
        return StatePair(overlap_w=w, psi_u=_readonly(psi_u), psi_v=_readonly(psi_v))

    @staticmethod
    def phi_vectors(pair, mu):
        """Non-normalized vectors phi_u = psi_u - mu psi_v and phi_v = mu psi_u - psi_v."""
        if mu < 0:
            raise OutOfRange(f'mu={mu!r} must be non-negative', field='mu')
        phi_u = pair.psi_u - mu * pair.psi_v
        phi_v = mu * pair.psi_u - pair.psi_v
        return phi_u, phi_v

    @staticmethod
    def positivity_margin(w, mu):
        """2 mu / (1 + mu^2) - w; A_? is PSD iff this is non-negative."""
        return 2.0 * mu / (1.0 + mu * mu) - w

    @staticmethod
    def check_mu(w, mu):
        """
        Validate a (w, mu) pair.

        Raises:
            OutOfRange: if w is outside [0, 1) or mu outside [0, 1]
            ConstraintViolated: if 2 mu / (1 + mu^2) < w beyond tolerance
        """
        w = check_overlap(w)
        if mu is None or not math.isfinite(mu) or mu < 0.0 or mu > 1.0:
            raise OutOfRange(f'mu={mu!r} outside [0, 1]', field='mu')
        margin = TwoStateDiscriminator.positivity_margin(w, mu)
        if margin < -get_config().constraint_tol:
            raise ConstraintViolated(
                f'2*mu/(1+mu^2) = {margin + w:.6g} < w = {w:.6g} for mu={mu:.6g}',
                field='mu',
            )
        return w, float(mu)

    @staticmethod
    def calibrate_delta(w, mu):
        """
        Normalization delta for which lambda_max(A_u + A_v) = 1.

        Returns:
            float: (1 - w)(1 + mu)^2

        Raises:
            ConstraintViolated: if the positivity constraint fails
        """
        w, mu = TwoStateDiscriminator.check_mu(w, mu)
        return (1.0 - w) * (1.0 + mu) ** 2

    @staticmethod
    def detection_operator(w, mu, delta=1.0):
        """A_u + A_v for a given delta, in the psi_u/psi_v embedding."""
        pair = TwoStateDiscriminator.embed_states(w)
        phi_u, phi_v = TwoStateDiscriminator.phi_vectors(pair, mu)
        return (projector(phi_u) + projector(phi_v)) / delta

    @staticmethod
    def build_povm(w, mu):
        """
        Assemble the calibrated three-outcome POVM.

        Returns:
            TwoStatePovm

        Raises:
            ConstraintViolated: if the positivity constraint fails
        """
        delta = TwoStateDiscriminator.calibrate_delta(w, mu)
        pair = TwoStateDiscriminator.embed_states(w)
        phi_u, phi_v = TwoStateDiscriminator.phi_vectors(pair, mu)
        a_u = projector(phi_u) / delta
        a_v = projector(phi_v) / delta
        a_inconclusive = np.eye(2, dtype=np.complex128) - a_u - a_v
        logger.debug('Built POVM for w=%.6g mu=%.6g delta=%.6g', w, mu, delta)
        return TwoStatePovm(
            a_u=_readonly(a_u),
            a_v=_readonly(a_v),
            a_inconclusive=_readonly(a_inconclusive),
            params=PovmParams(mu=float(mu), delta=delta, w=float(w)),
        )

    @staticmethod
    def outcome_probs_closed_form(w, mu):
        """
        Closed-form outcome probabilities given either sent state.

            P(correct) = (1 - mu w)^2 / delta
            P(error)   = (w - mu)^2 / delta
            P(?)       = 1 - P(correct) - P(error)

        Returns:
            OutcomeProbs
        """
        delta = TwoStateDiscriminator.calibrate_delta(w, mu)
        p_correct = (1.0 - mu * w) ** 2 / delta
        p_error = (w - mu) ** 2 / delta
        return OutcomeProbs(
            p_correct=p_correct,
            p_error=p_error,
            p_inconclusive=1.0 - p_correct - p_error,
        )

    @staticmethod
    def inconclusive_closed_form(w, mu):
        """
        Direct form of P(?).

        (1 + w)(1 + mu^2)(2 mu / (1 + mu^2) - w) / ((1 - w)(1 + mu)^2). The
        printed variant with (1 + mu)^2 in the numerator does not normalize.
        """
        delta = TwoStateDiscriminator.calibrate_delta(w, mu)
        margin = TwoStateDiscriminator.positivity_margin(w, mu)
        return (1.0 + w) * (1.0 + mu * mu) * margin / delta

    @staticmethod
    def outcome_probs_born(povm, pair, sent):
        """
        Outcome probabilities Tr(A |psi><psi|) for the state ``sent``.

        Args:
            povm (TwoStatePovm): calibrated POVM
            pair (StatePair): embedded states
            sent (StateLabel): which state was transmitted

        Returns:
            OutcomeProbs
        """
        sent = StateLabel(sent)
        psi = pair.state(sent)
        correct = povm.a_u if sent is StateLabel.U else povm.a_v
        wrong = povm.a_v if sent is StateLabel.U else povm.a_u

        def born(element):
            return float(np.real(np.vdot(psi, element @ psi)))

        return OutcomeProbs(
            p_correct=born(correct),
            p_error=born(wrong),
            p_inconclusive=born(povm.a_inconclusive),
        )

    @staticmethod
    def special_mu(w, kind):
        """
        mu for the two degenerate regimes.

        Args:
            w (float): overlap
            kind (str): ``'usd'`` (mu = w, no errors) or ``'min_error'`` /
                ``'breidbart'`` (mu = (1 - sqrt(1 - w^2)) / w, no inconclusive)

        Raises:
            OutOfRange: for an unknown kind or w outside [0, 1)
        """
        w = check_overlap(w)
        if kind == 'usd':
            return w
        if kind in ('min_error', 'breidbart'):
            # w / (1 + sqrt(1 - w^2)) equals (1 - sqrt(1 - w^2)) / w and is 0 at w = 0
            return w / (1.0 + math.sqrt(1.0 - w * w))
        raise OutOfRange(f'unknown special mu kind {kind!r}', field='kind')

    @staticmethod
    def resolve_mu(w, value, bob_mu=None):
        """
        Turn a configured mu (number or regime name) into a number.

        ``'bob'`` mirrors Bob's own regime, the simplest general-case Eve.
        """
        if isinstance(value, str):
            name = value.strip().lower()
            if name in SPECIAL_MU_KINDS:
                return TwoStateDiscriminator.special_mu(w, name)
            if name == 'bob':
                if bob_mu is None:
                    raise OutOfRange("'bob' needs Bob's mu", field='eve_mu')
                return float(bob_mu)
            try:
                value = float(name)
            except ValueError:
                raise OutOfRange(f'unrecognised mu {value!r}', field='mu')
        return float(value)

    @staticmethod
    def validate_povm(elements, tol=None):
        """
        Check completeness and positivity of a POVM of any size.

        Args:
            elements: sequence (or mapping) of square matrices of equal dimension
            tol (float): tolerance (defaults to ``POVM_TOL``)

        Returns:
            PovmValidationReport

        Raises:
            DimensionMismatch: if there are no elements or their dimensions differ
        """
        tol = get_config().povm_tol if tol is None else tol
        if hasattr(elements, 'values'):
            elements = list(elements.values())
        matrices = [as_matrix(e) for e in elements]
        if not matrices:
            raise DimensionMismatch('a POVM needs at least one element')
        dims = {m.shape[0] for m in matrices}
        if len(dims) != 1:
            raise DimensionMismatch(f'POVM elements have mixed dimensions {sorted(dims)}')
        dim = dims.pop()

        residual = max_abs(sum(matrices) - np.eye(dim))
        min_eigenvalues = []
        hermitian = True
        for m in matrices:
            try:
                min_eigenvalues.append(hermitian_eig(m, tol=tol).min_eigenvalue)
            except NotHermitian:
                hermitian = False
                h = 0.5 * (m + m.conj().T)
                min_eigenvalues.append(hermitian_eig(h).min_eigenvalue)

        passed = hermitian and residual <= tol and min(min_eigenvalues) >= -tol
        return PovmValidationReport(
            completeness_residual=residual,
            min_eigenvalues=tuple(min_eigenvalues),
            tolerance=tol,
            passed=passed,
        )
