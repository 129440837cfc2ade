"""
Typed access to the ``QCA`` settings record.

Values are read from ``django.conf.settings`` on every call so that
``override_settings`` in tests takes effect immediately.
"""
import os
from dataclasses import dataclass

from django.conf import settings

from .exceptions import OutOfRange


@dataclass(frozen=True)
class QcaConfig:
    hermitian_tol: float
    psd_clamp_tol: float
    sqrt_tol: float
    unitary_tol: float
    rank_tol: float
    jacobi_max_sweeps: int
    jacobi_eps: float
    povm_tol: float
    constraint_tol: float
    zero_prob_tol: float
    blinding_amplitude: float
    threads: int
    shard_size: int
    default_scenario: dict
    monitor: dict

    @property
    def workers(self):
        """Worker count for the simulation pool; 0 in settings means one per CPU."""
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


def _threads(value):
    """Parse ``THREADS``, which may arrive as text from ``QCA_THREADS``."""
    try:
        threads = int(str(value).strip())
    except ValueError:
        threads = -1
    if threads < 0:
        raise OutOfRange(f'QCA_THREADS={value!r} must be a non-negative integer', field='QCA_THREADS')
    return threads


def get_config():
    """
    Build a ``QcaConfig`` from the current Django settings.

    Raises:
        OutOfRange: if ``THREADS`` is not a non-negative integer
    """
    raw = settings.QCA
    return QcaConfig(
        hermitian_tol=float(raw['HERMITIAN_TOL']),
        psd_clamp_tol=float(raw['PSD_CLAMP_TOL']),
        sqrt_tol=float(raw['SQRT_TOL']),
        unitary_tol=float(raw['UNITARY_TOL']),
        rank_tol=float(raw['RANK_TOL']),
        jacobi_max_sweeps=int(raw['JACOBI_MAX_SWEEPS']),
        jacobi_eps=float(raw['JACOBI_EPS']),
        povm_tol=float(raw['POVM_TOL']),
        constraint_tol=float(raw['CONSTRAINT_TOL']),
        zero_prob_tol=float(raw['ZERO_PROB_TOL']),
        blinding_amplitude=float(raw['BLINDING_AMPLITUDE']),
        threads=_threads(raw['THREADS']),
        shard_size=int(raw['SHARD_SIZE']),
        default_scenario=dict(raw['DEFAULT_SCENARIO']),
        monitor=dict(raw['MONITOR']),
    )
