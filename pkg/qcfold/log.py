import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | int = "INFO") -> None:
    """Install a single stream handler on the package logger (idempotent).

    Repeated calls re-point the handler at the current ``sys.stderr``.
    """
    root = logging.getLogger("qcfold")
    root.setLevel(level)
    for handler in root.handlers:
        if getattr(handler, "_qcfold", False):
            handler.stream = sys.stderr
            return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._qcfold = True
    root.addHandler(handler)
