"""Append-only run log under SPINBIN_HOME."""

import os
import time
import traceback

from . import config


def log(msg):
    try:
        os.makedirs(os.path.dirname(config.LOG_PATH), exist_ok=True)
        with open(config.LOG_PATH, "a") as f:
            ts = time.strftime("%H:%M:%S")
            f.write(f"[{ts}] {msg}\n")
    except Exception:
        pass


def log_error(context, error):
    """Write an error and the active traceback to the run log."""
    try:
        os.makedirs(os.path.dirname(config.LOG_PATH), exist_ok=True)
        with open(config.LOG_PATH, "a") as f:
            ts = time.strftime("%H:%M:%S")
            f.write(f"[{ts}] ERROR {context}: {error}\n")
            tb = traceback.format_exc()
            if tb and not tb.startswith("NoneType: None"):
                f.write(tb)
    except Exception:
        pass
