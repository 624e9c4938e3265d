#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

import enum
import hashlib
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Optional

import numpy as np

_BUFFER_SIZE = 10 * 1024 * 1024

def thread_count(configured: Optional[int] = None) -> Optional[int]:
    """Worker count: MKVLAB_THREADS caps the configured value; None lets the pool decide."""
    ncpus = configured if configured and configured > 0 else None
    env_value = os.environ.get("MKVLAB_THREADS")
    if env_value:
        try:
            cap = int(env_value)
        except ValueError:
            logging.warning(f"Ignoring MKVLAB_THREADS={env_value!r}, expected an integer")
        else:
            if cap > 0:
                ncpus = cap if ncpus is None else min(ncpus, cap)
    return ncpus

def derive_key(seed: int, *tags: int) -> int:
    """128-bit Philox key for a (seed, tags...) stream."""
    if seed < 0:
        raise ValueError(f"Seeds must be non-negative, got {seed}")
    words = np.random.SeedSequence([seed, *tags]).generate_state(2, np.uint64)
    return (int(words[0]) << 64) | int(words[1])

def _finite_or_text(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(float(value))
    if isinstance(value, dict):
        return {k: _finite_or_text(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_text(i) for i in value]
    return value

def canonical_json(obj: Any) -> str:
    """Sorted, indented strict JSON. Non-finite floats are written as the strings "inf", "-inf" and "nan"."""
    return json.dumps(_finite_or_text(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"

def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as in_stream:
        while True:
            buf = in_stream.read(_BUFFER_SIZE)
            if not buf:
                break
            h.update(buf)
    return h.hexdigest()

def to_builtin(value: Any) -> Any:
    """Turn numpy scalars/arrays and tuples into JSON-friendly builtins."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(i) for i in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(i) for i in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, enum.Enum):
        return value.value
    return value
