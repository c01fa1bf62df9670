from __future__ import annotations

import os
import sys

import importlib_metadata as metadata

PACKAGE_NAME = "sglab"
__version__ = metadata.version(PACKAGE_NAME)
__python_version__ = ".".join(map(str, sys.version_info))

THREADS_ENV_VAR = "SG_LAB_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1

    try:
        return max(1, int(raw))
    except ValueError:
        return 1
