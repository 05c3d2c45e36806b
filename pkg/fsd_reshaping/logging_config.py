import json
import logging
import os

# Context attributes copied from ``extra=`` into the JSON payload
CONTEXT_FIELDS = (
    "run_id",
    "preset",
    "stage",
    "iteration",
    "box_id",
    "boxes",
    "evaluations",
    "value",
    "best_value",
    "residual",
    "seed",
    "latency_ms",
    "path",
)


class JsonFormatter(logging.Formatter):
    def format(self, record):
        data = {
            "time": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "module": record.module,
            "message": record.getMessage(),
        }
        for key in CONTEXT_FIELDS:
            if hasattr(record, key):
                data[key] = _jsonable(getattr(record, key))
        if record.exc_info:
            data["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(data)


def _jsonable(value):
    # numpy scalars and arrays come through ``extra`` from the solvers
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def configure_logging(level=None):
    """Install the JSON handler on the root logger once.

    ``level`` falls back to ``FSD_LOG_LEVEL`` and then INFO.
    """
    if level is None:
        level = os.environ.get("FSD_LOG_LEVEL", "INFO")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root = logging.getLogger()
    root.setLevel(level)
    if any(isinstance(h.formatter, JsonFormatter) for h in root.handlers):
        return
    handler = logging.StreamHandler()
    handler.setFormatter(JsonFormatter())
    root.addHandler(handler)
