"""
Django settings for core project.

The project hosts the ``microgrid`` app: the S-ORC scheduling model, the
community trading model and the MILP engine they run on. There is no HTTP
surface and no database; Django provides configuration, validation,
management commands and the test runner.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "django-insecure-microgrid-offline-solver")

DEBUG = os.environ.get("DJANGO_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "rest_framework",
    "microgrid",
]

# Solves are in-memory; nothing is persisted.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Celery Configuration
REDIS_PORT = int(os.environ.get("REDIS_PORT", 6379))
CELERY_BROKER_URL = os.environ.get("CELERY_BROKER_URL", f"redis://redis:{REDIS_PORT}/0")
CELERY_RESULT_BACKEND = os.environ.get("CELERY_RESULT_BACKEND", f"redis://redis:{REDIS_PORT}/1")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
# without a broker every task runs in-process
CELERY_TASK_ALWAYS_EAGER = os.environ.get("MICROGRID_EAGER", "1") == "1"
CELERY_TASK_EAGER_PROPAGATES = True


# MILP engine
MILP_SOLVER = {
    "FEASIBILITY_TOL": 1e-7,
    "INTEGRALITY_TOL": 1e-6,
    "REL_GAP": 1e-6,
    "OPTIMALITY_TOL": 1e-9,
    "PIVOT_TOL": 1e-9,
    "BREAKDOWN_PIVOT": 1e-11,
    "REFACTOR_EVERY": 64,
    "MAX_NODES": 100_000,
    "TIME_LIMIT": None,
    "RESORT_EVERY": 64,
}

MICROGRID = {
    "SCHEMA_VERSION": 1,
    "CSV_DIGITS": 9,
    # display only, never used in computation
    "CURRENCY_LABEL": os.environ.get("MICROGRID_CURRENCY", "EUR"),
}


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "{asctime} {levelname} {name} {message}", "style": "{"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "microgrid": {
            "handlers": ["console"],
            "level": os.environ.get("MICROGRID_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
