"""
Runtime settings.

Environment-driven knobs that are not part of an experiment config.
A `.env` file in the working directory is loaded first when present.
"""
import os
import logging
from typing import Any, Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()


class RuntimeSettings:
    """
    Centralized access to environment configuration.
    """
    THREADS_ENV = "RECSTEAL_THREADS"
    LOG_LEVEL_ENV = "RECSTEAL_LOG_LEVEL"
    AUDIT_FILE_ENV = "RECSTEAL_AUDIT_LOG_FILE"
    AUDIT_STDOUT_ENV = "RECSTEAL_AUDIT_LOG_STDOUT"
    AUDIT_MAX_BYTES_ENV = "RECSTEAL_AUDIT_LOG_MAX_BYTES"
    AUDIT_BACKUP_COUNT_ENV = "RECSTEAL_AUDIT_LOG_BACKUP_COUNT"
    RUN_SLOW_ENV = "RECSTEAL_RUN_SLOW"

    @classmethod
    def threads(cls) -> int:
        raw = os.getenv(cls.THREADS_ENV, "1")
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {cls.THREADS_ENV}={raw!r}; using 1")
            return 1
        return max(1, value)

    @classmethod
    def log_level(cls) -> str:
        return os.getenv(cls.LOG_LEVEL_ENV, "INFO").upper()

    @classmethod
    def audit_log_file(cls) -> Optional[str]:
        return os.getenv(cls.AUDIT_FILE_ENV) or None

    @classmethod
    def audit_log_stdout(cls) -> bool:
        return os.getenv(cls.AUDIT_STDOUT_ENV, "false").lower() == "true"

    @classmethod
    def audit_max_bytes(cls) -> int:
        return int(os.getenv(cls.AUDIT_MAX_BYTES_ENV, str(10 * 1024 * 1024)))

    @classmethod
    def audit_backup_count(cls) -> int:
        return int(os.getenv(cls.AUDIT_BACKUP_COUNT_ENV, "5"))

    @classmethod
    def run_slow(cls) -> bool:
        return os.getenv(cls.RUN_SLOW_ENV, "0").lower() in ("1", "true", "yes")

    @classmethod
    def describe(cls) -> Dict[str, Any]:
        return {
            "threads": cls.threads(),
            "log_level": cls.log_level(),
            "audit": {
                "file": cls.audit_log_file(),
                "stdout": cls.audit_log_stdout(),
                "max_bytes": cls.audit_max_bytes(),
                "backup_count": cls.audit_backup_count(),
            },
        }
