"""
Query Audit Logging

JSON audit trail of every oracle event: queries served, cache hits,
defended responses and refused queries. Entries go to a dedicated,
non-propagating logger with a size-rotating file handler when
RECSTEAL_AUDIT_LOG_FILE is set, and optionally to the application log.
"""
import os
import json
import logging
import logging.handlers
import threading
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, Optional, Sequence

from .settings import RuntimeSettings

logger = logging.getLogger(__name__)

AUDIT_LOGGER_NAME = "recsteal.query_audit"
_handler_lock = threading.Lock()


class QueryEventType(Enum):
    """Types of oracle audit events."""
    QUERY_SERVED = "query_served"
    CACHE_HIT = "cache_hit"
    DEFENSE_APPLIED = "defense_applied"
    BUDGET_EXHAUSTED = "budget_exhausted"


def _attach_file_handler(audit_logger: logging.Logger, log_file: str, max_bytes: int, backup_count: int) -> None:
    path = os.path.abspath(log_file)
    with _handler_lock:
        for handler in audit_logger.handlers:
            if getattr(handler, "baseFilename", None) == path:
                return
        log_dir = os.path.dirname(path)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)
        handler = logging.handlers.RotatingFileHandler(
            filename=path,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding="utf-8",
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        audit_logger.addHandler(handler)


class QueryAuditLogger:
    """
    Writes one JSON object per oracle event.

    Disabled loggers (no file and no stdout) return the entry they would
    have written so callers and tests can still inspect it.
    """

    def __init__(
        self,
        log_file: Optional[str] = None,
        log_to_stdout: Optional[bool] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        """
        Args:
            log_file: JSON-lines file; defaults to RECSTEAL_AUDIT_LOG_FILE
            log_to_stdout: Mirror entries to the application log; defaults
                to RECSTEAL_AUDIT_LOG_STDOUT
            context: Fields stamped onto every entry (e.g. experiment, seed, method)
        """
        self.log_file = log_file if log_file is not None else RuntimeSettings.audit_log_file()
        self.log_to_stdout = (
            log_to_stdout if log_to_stdout is not None else RuntimeSettings.audit_log_stdout()
        )
        self.context = dict(context or {})

        self.logger = logging.getLogger(AUDIT_LOGGER_NAME)
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False
        if self.log_file:
            _attach_file_handler(
                self.logger,
                self.log_file,
                RuntimeSettings.audit_max_bytes(),
                RuntimeSettings.audit_backup_count(),
            )

    @property
    def enabled(self) -> bool:
        return bool(self.log_file) or self.log_to_stdout

    def log_event(
        self,
        event_type: QueryEventType,
        user: int,
        spent: int,
        budget: Optional[int],
        items: Optional[Sequence[int]] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event_type": event_type.value,
            "user": int(user),
            "spent": spent,
            "budget": budget,
            "list_length": len(items) if items is not None else 0,
            **self.context,
            "metadata": metadata or {},
        }
        if self.enabled:
            self._write(entry)
        return entry

    def _write(self, entry: Dict[str, Any]) -> None:
        payload = json.dumps(entry, ensure_ascii=False, default=str)
        if self.log_file:
            self.logger.info(payload)
        if self.log_to_stdout:
            logger.info(f"AUDIT {payload}")
