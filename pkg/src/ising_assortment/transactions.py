"""Reading basket data.

Two input formats are accepted:

* ``.csv`` - the sampler's output: a header of product ids followed by one
  comma-separated 0/1 row per basket.
* anything else - one basket per line, purchased product ids separated by
  whitespace. Blank lines are empty baskets and ``#`` starts a comment line.

Product ids are ordered numerically when they are all integers and
lexicographically otherwise; that order defines the model's product indices.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .estimation import TransactionSample
from .sampling import read_batch_csv

_ID = re.compile(r"[\w.:/\-]+")


class TransactionParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _order(ids) -> list[str]:
    ids = list(ids)
    if all(re.fullmatch(r"-?\d+", i) for i in ids):
        return sorted(ids, key=int)
    return sorted(ids)


def read_transactions(path) -> tuple[TransactionSample, list[str]]:
    """Parse a transaction file into spin baskets and the ordered product ids."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        try:
            header, data = read_batch_csv(path)
        except ValueError as exc:
            m = re.search(r":(\d+):", str(exc))
            raise TransactionParseError(path, int(m.group(1)) if m else 1, str(exc)) from exc
        if data.shape[0] == 0:
            raise TransactionParseError(path, 1, "no baskets")
        return TransactionSample.from_binary(data), [str(h) for h in header]

    baskets: list[list[str]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        items = line.split()
        for tok in items:
            if not _ID.fullmatch(tok):
                raise TransactionParseError(path, lineno, f"invalid product id {tok!r}")
        if len(set(items)) != len(items):
            raise TransactionParseError(path, lineno, "product listed twice in one basket")
        baskets.append(items)
    if not baskets:
        raise TransactionParseError(path, 1, "no baskets")
    ids = _order({i for b in baskets for i in b})
    if not ids:
        raise TransactionParseError(path, 1, "no product ids")
    index = {pid: k for k, pid in enumerate(ids)}
    data = np.zeros((len(baskets), len(ids)), dtype=np.uint8)
    for r, b in enumerate(baskets):
        data[r, [index[i] for i in b]] = 1
    return TransactionSample.from_binary(data), ids
