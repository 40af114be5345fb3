"""Configure Django before pytest collects the microgrid test modules."""
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
django.setup()
