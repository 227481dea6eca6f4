import logging

from django.core.management.base import BaseCommand, CommandError

from anomaly_app.exceptions import DataFormatError, LinescanError

logger = logging.getLogger(__name__)


class LinescanCommand(BaseCommand):
    """BaseCommand that maps toolkit errors onto exit codes"""

    def handle(self, *args, **options):
        try:
            return self.run_command(**options)
        except LinescanError as exc:
            logger.error("%s failed: %s", type(self).__module__.rsplit('.', 1)[-1], exc)
            raise CommandError(str(exc), returncode=exc.exit_code)
        except OSError as exc:
            raise CommandError(str(exc), returncode=DataFormatError.exit_code)

    def run_command(self, **options):
        raise NotImplementedError
