"""Atomic file output: write to a sibling temp file, then rename over.

Every artifact writer in the package goes through these helpers so a failure
mid-write never leaves a truncated file at the destination path.
"""

import os
from contextlib import contextmanager


@contextmanager
def atomic_output(path):
    """Yield a temp path next to ``path``; on success rename it into place."""
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    with atomic_output(path) as tmp:
        with open(tmp, "w") as fh:
            fh.write(text)


def atomic_write_bytes(path, blob):
    with atomic_output(path) as tmp:
        with open(tmp, "wb") as fh:
            fh.write(blob)
