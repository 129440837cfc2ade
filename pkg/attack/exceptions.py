"""
Error hierarchy for the quantum control attack toolkit.

Every domain failure derives from ``QcaError`` and carries a short,
machine-readable ``code``. The management command turns these into
one-line JSON messages and process exit codes.
"""


class QcaError(Exception):
    """Base class for all toolkit errors."""

    code = 'qca_error'

    def __init__(self, message, field=None):
        super().__init__(message)
        self.message = message
        self.field = field

    def as_dict(self):
        return {'error': self.code, 'field': self.field, 'detail': self.message}


class NonFiniteMatrix(QcaError):
    code = 'non_finite_matrix'


class NotSquare(QcaError):
    code = 'not_square'


class NotHermitian(QcaError):
    code = 'not_hermitian'


class NotPsd(QcaError):
    code = 'not_psd'


class NotUnitary(QcaError):
    code = 'not_unitary'


class NoConvergence(QcaError):
    code = 'no_convergence'


class DimensionMismatch(QcaError):
    code = 'dimension_mismatch'


class OutOfRange(QcaError):
    code = 'out_of_range'


class ConstraintViolated(QcaError):
    """The POVM positivity constraint 2*mu/(1+mu^2) >= w does not hold."""

    code = 'constraint_violated'


class ZeroProbabilityOutcome(QcaError):
    code = 'zero_probability_outcome'


class Infeasible(QcaError):
    """
    Eve cannot match Bob's expected statistics.

    ``kind`` is ``'rate'`` when her conclusive gain is too small and
    ``'error'`` when her own error rate exceeds what her resent clicks may carry.
    """

    code = 'infeasible'

    def __init__(self, message, kind, field=None):
        super().__init__(message, field=field)
        self.kind = kind

    def as_dict(self):
        data = super().as_dict()
        data['kind'] = self.kind
        return data


class InsufficientData(QcaError):
    code = 'insufficient_data'


class ClickLogFormatError(QcaError):
    code = 'click_log_format'
