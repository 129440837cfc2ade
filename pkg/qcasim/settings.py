"""
Django settings for the qcasim project.

The project carries no database, URL routing or middleware: it is a
numerical toolkit driven through management commands. All simulation
tunables live in the ``QCA`` record below and are read through
``attack.conf.get_config()``.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-qca-development-key-not-for-deployment',
)

DEBUG = os.environ.get('DJANGO_DEBUG', 'False').lower() in ('1', 'true', 'yes')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'attack',
]

MIDDLEWARE = []

# No database: every computation is a pure function of its scenario.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Django REST Framework settings
# Serializers validate scenario files and render reports; no API views exist.
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}


# Quantum control attack toolkit settings
QCA = {
    # operator-core tolerances
    'HERMITIAN_TOL': 1e-10,
    'PSD_CLAMP_TOL': 1e-10,
    'SQRT_TOL': 1e-9,
    'UNITARY_TOL': 1e-10,
    'RANK_TOL': 1e-10,
    'JACOBI_MAX_SWEEPS': 60,
    'JACOBI_EPS': 1e-14,
    # states-povm tolerances
    'POVM_TOL': 1e-10,
    'CONSTRAINT_TOL': 1e-12,
    'ZERO_PROB_TOL': 1e-15,
    # feed-forward
    'BLINDING_AMPLITUDE': 1.0,
    # attack-sim execution
    'THREADS': os.environ.get('QCA_THREADS', '0'),
    'SHARD_SIZE': 262144,
    'DEFAULT_SCENARIO': {
        'w': 0.6,
        'bob_mu': '0.5',
        'eve_mu': '0.5',
        'transmittance': 0.1,
        'efficiency': 0.2,
        'dark_count_prob': 1e-5,
        'pulses': 1_000_000,
        'seed': 0,
        'intrinsic_error': 0.01,
        'fake_click_prob': 1.0,
    },
    # countermeasures
    'MONITOR': {
        'window_size': 10000,
        'rate_threshold': 4.0,
        'coincidence_threshold': 4.0,
    },
}


# Logging goes to stderr so that stdout only carries reports.
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '%(asctime)s [%(levelname)s] [%(name)s] %(message)s',
            'datefmt': '%Y-%m-%d %H:%M:%S',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'standard',
        },
    },
    'loggers': {
        'attack': {
            'handlers': ['console'],
            'level': os.environ.get('QCA_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
