import csv
import os

from .weights import CompetitiveWeights

FIELDS = ("step", "l1", "l2", "r1", "r2", "strategy")


class WeightTrace:
    """Appends one (step, l1, l2, r1, r2, strategy) row per teacher update."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self._f = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._f)
        self._writer.writerow(FIELDS)

    def append(self, step: int, l1: float, l2: float, w: CompetitiveWeights):
        self._writer.writerow((step, repr(float(l1)), repr(float(l2)),
                               repr(float(w.r1)), repr(float(w.r2)), w.strategy))

    def close(self):
        if not self._f.closed:
            self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_weight_trace(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        row["step"] = int(row["step"])
        for key in ("l1", "l2", "r1", "r2"):
            row[key] = float(row[key])
    return rows
