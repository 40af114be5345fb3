from django.apps import AppConfig


class MicrogridConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "microgrid"
    verbose_name = "Solar-ORC community optimizer"
