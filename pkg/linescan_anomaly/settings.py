"""
Django settings for linescan_anomaly project.
"""

from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# No request handling happens here, but Django still wants a key.
SECRET_KEY = config('SECRET_KEY', default='django-insecure-linescan-anomaly')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost', cast=Csv())


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'anomaly_app',
]


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases

DB_ENGINE = config('DB_ENGINE', default='sqlite3')

if DB_ENGINE == 'mysql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.mysql',
            'NAME': config('DB_NAME', default='linescan_anomaly'),
            'USER': config('DB_USER', default='root'),
            'PASSWORD': config('DB_PASSWORD', default=''),
            'HOST': config('DB_HOST', default='localhost'),
            'PORT': config('DB_PORT', default='3306'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': config('DB_NAME', default=str(BASE_DIR / 'db.sqlite3')),
        }
    }


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/4.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging

LOG_LEVEL = config('HSI_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'anomaly_app': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Detector defaults, overridable per invocation by command flags

DETECTION = {
    'BUFFER_LEN': config('HSI_BUFFER_LEN', default=99, cast=int),
    'ERX_ALPHA': config('HSI_ERX_ALPHA', default=0.1, cast=float),
    'ERX_DIMS': config('HSI_ERX_DIMS', default=5, cast=int),
    'ERX_EPSILON': config('HSI_ERX_EPSILON', default=1e-5, cast=float),
    'RXBIL_ETA': config('HSI_RXBIL_ETA', default=0.5, cast=float),
    'RXBIL_CHUNK': config('HSI_RXBIL_CHUNK', default=32, cast=int),
    'LBLAD_COMPONENTS': config('HSI_LBLAD_COMPONENTS', default=3, cast=int),
    'LBLAD_EXCLUDE_SCORE': config('HSI_LBLAD_EXCLUDE_SCORE', default=3.0, cast=float),
    'POWER_MAX_ITER': config('HSI_POWER_MAX_ITER', default=100, cast=int),
    'SEEDS': config('HSI_SEEDS', default=5, cast=int),
    'OUTPUT_DIR': config('HSI_OUTPUT_DIR', default=str(BASE_DIR / 'results')),
}

BENCHMARK = {
    'LINES': config('HSI_BENCH_LINES', default=3000, cast=int),
    'REPEATS': config('HSI_BENCH_REPEATS', default=5, cast=int),
    'BAND_SWEEP': list(range(10, 201, 10)),
    'BAND_SWEEP_PIXELS': 500,
    'PIXEL_SWEEP': list(range(100, 1501, 100)),
    'PIXEL_SWEEP_BANDS': 50,
}


# Tests

TEST_RUNNER = 'anomaly_app.test_runner.LinescanTestRunner'

RUN_ACCEPTANCE_TESTS = config('HSI_RUN_ACCEPTANCE', default=False, cast=bool)
