from django.apps import AppConfig


class AnomalyAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'anomaly_app'
    verbose_name = 'Line-scan anomaly detection'
