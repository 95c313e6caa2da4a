"""Binary window-dataset files.

Layout (little-endian): magic ``CHRN``, version u32 = 1, n_samples u64,
tau u32, n_features u32; then per sample: user_id u64, anchor_date as
days-since-epoch i32, X as tau*n_features float32 row-major, Y as 4 bytes
in {0, 1}. Files store raw (unnormalized) features; pass NormStats at read
time to standardize.
"""

import numpy as np

from churnforge.errors import DataError
from churnforge.data.windows import HORIZON_WEEKS, WindowSample

MAGIC = b"CHRN"
VERSION = 1


def write_window_dataset(path, samples, tau=None, n_features=None):
    """Writes samples to ``path``. An empty list is only accepted when the
    shape is pinned explicitly via ``tau``/``n_features``."""
    if samples:
        tau, nf = samples[0].X.shape
    elif tau is not None and n_features is not None:
        nf = n_features
    else:
        raise DataError("refusing to write an empty window dataset of unknown shape")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array([VERSION], dtype="<u4").tobytes())
        fh.write(np.array([len(samples)], dtype="<u8").tobytes())
        fh.write(np.array([tau, nf], dtype="<u4").tobytes())
        for s in samples:
            if s.X.shape != (tau, nf):
                raise DataError(
                    f"inconsistent sample shape {s.X.shape}, expected {(tau, nf)}"
                )
            fh.write(np.array([s.user_id], dtype="<u8").tobytes())
            fh.write(np.array([s.anchor_day], dtype="<i4").tobytes())
            fh.write(np.ascontiguousarray(s.X, dtype="<f4").tobytes())
            fh.write(np.asarray(s.Y, dtype=np.uint8).tobytes())


def _read_exact(fh, n, path):
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"{path}: truncated window dataset")
    return buf


def read_window_dataset(path, stats=None):
    """Returns list[WindowSample] with float64 X; stats standardizes X."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path) != MAGIC:
            raise DataError(f"{path}: not a window dataset")
        version = int(np.frombuffer(_read_exact(fh, 4, path), dtype="<u4")[0])
        if version != VERSION:
            raise DataError(f"{path}: unsupported dataset version {version}")
        n = int(np.frombuffer(_read_exact(fh, 8, path), dtype="<u8")[0])
        tau, nf = np.frombuffer(_read_exact(fh, 8, path), dtype="<u4").astype(int)
        rec_bytes = 8 + 4 + 4 * tau * nf + HORIZON_WEEKS
        samples = []
        for _ in range(n):
            rec = _read_exact(fh, rec_bytes, path)
            user_id = int(np.frombuffer(rec, dtype="<u8", count=1)[0])
            anchor = int(np.frombuffer(rec, dtype="<i4", count=1, offset=8)[0])
            X = np.frombuffer(rec, dtype="<f4", count=tau * nf, offset=12)
            X = X.reshape(tau, nf).astype(np.float64)
            Y = np.frombuffer(
                rec, dtype=np.uint8, count=HORIZON_WEEKS, offset=12 + 4 * tau * nf
            ).copy()
            if np.any(Y > 1):
                raise DataError(f"{path}: labels must be 0/1 bytes")
            if stats is not None:
                X = stats.transform(X)
            samples.append(WindowSample(user_id, anchor, X, Y))
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after {n} samples")
    return samples
