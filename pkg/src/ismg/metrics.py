"""Iteration, synchronisation and arithmetic-intensity accounting per timestep.

Counting rules:

* every smoothing sweep increments ``I_f`` or ``I_c``;
* a red-black sweep costs 2 synchronisations, a serial (lexicographic or
  block) sweep costs 1;
* ``N_Lap`` grows by ``(cells / fine_cells) * (stencil_points / 5)`` per sweep,
  i.e. one unit is one five-point Laplacian over the whole fine grid.
"""

from __future__ import annotations

import csv
from pathlib import Path

COLUMNS = ("step", "I_f", "I_c", "NCC_f", "NCC_c", "NCC_t", "N_Lap",
           "restrictions", "prolongations", "residual_final")

MEAN_KEYS = ("I_f", "I_c", "NCC_f", "NCC_c", "NCC_t", "N_Lap", "restrictions", "prolongations")


class RunMetrics:
    """Per-timestep counters; rows are appended by :meth:`close_timestep`."""

    def __init__(self):
        self.rows = []
        self._open()

    def _open(self):
        self.I_f = 0
        self.I_c = 0
        self.NCC_f = 0
        self.NCC_c = 0
        self.N_Lap = 0.0
        self.restrictions = 0
        self.prolongations = 0
        self.residual_final = 0.0

    @property
    def NCC_t(self):
        return self.NCC_f + self.NCC_c

    def record_sweep(self, level_kind, stencil_points, cells, fine_cells_total, sync_cost=None):
        """Account one smoothing sweep on a ``"fine"`` or ``"coarse"`` level.

        ``sync_cost`` defaults to 2 on fine levels (red-black) and 1 on the
        coarse level (serial Gauss-Seidel).
        """
        if level_kind == "fine":
            self.I_f += 1
            self.NCC_f += 2 if sync_cost is None else sync_cost
        elif level_kind == "coarse":
            self.I_c += 1
            self.NCC_c += 1 if sync_cost is None else sync_cost
        else:
            raise ValueError(f"level_kind must be 'fine' or 'coarse', got {level_kind!r}")
        self.N_Lap += (cells / fine_cells_total) * (stencil_points / 5.0)

    def record_restriction(self, n=1):
        self.restrictions += n

    def record_prolongation(self, n=1):
        self.prolongations += n

    def close_timestep(self, residual_final=None):
        """Freeze the open counters into a row and reset them."""
        if residual_final is not None:
            self.residual_final = float(residual_final)
        row = {"step": len(self.rows) + 1, "I_f": self.I_f, "I_c": self.I_c,
               "NCC_f": self.NCC_f, "NCC_c": self.NCC_c, "NCC_t": self.NCC_t,
               "N_Lap": self.N_Lap, "restrictions": self.restrictions,
               "prolongations": self.prolongations, "residual_final": self.residual_final}
        self.rows.append(row)
        self._open()
        return row

    def means(self, window=None):
        """Mean of each counter over the last ``window`` rows (all rows by default)."""
        rows = self.rows if window is None else self.rows[-window:]
        if not rows:
            return {k: 0.0 for k in MEAN_KEYS}
        return {k: sum(r[k] for r in rows) / len(rows) for k in MEAN_KEYS}

    def write_csv(self, path):
        path = Path(path)
        try:
            with path.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
                w.writeheader()
                for row in self.rows:
                    w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k])
                                for k in COLUMNS})
        except OSError as exc:
            raise OSError(f"cannot write metrics CSV {path}: {exc}") from exc
        return path

    def summary(self, window=None):
        """Run-level means as ``key = value`` lines."""
        m = self.means(window)
        lines = [f"steps = {len(self.rows)}"]
        lines += [f"mean_{k} = {v:.6g}" for k, v in m.items()]
        return "\n".join(lines) + "\n"


def read_csv(path):
    """Load a metrics CSV back into a list of typed rows."""
    rows = []
    with Path(path).open() as fh:
        for rec in csv.DictReader(fh):
            rows.append({k: (float(v) if k in ("N_Lap", "residual_final") else int(v))
                         for k, v in rec.items()})
    return rows
