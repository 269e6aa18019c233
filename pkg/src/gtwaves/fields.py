"""Shared solution-field grid format, text serialization, and residual
reports.

A field file is line-oriented:

    GTWFIELD 1
    meta <one-line JSON>
    columns x t <component names...>
    rows <count>
    <count rows of repr-precision floats>
    end

Floats are written with repr (shortest representation that parses back
equal), so write-then-read is lossless.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError

MAGIC = "GTWFIELD"
FORMAT_VERSION = 1


@dataclass
class SolutionField:
    """Solution values on a regular, strictly monotone (x, t) grid.

    values[k, j, c] is component c at (ts[k], xs[j]).
    """
    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray
    names: tuple
    meta: dict = field(default_factory=dict)
    residuals: Optional[np.ndarray] = None
    residual_names: tuple = ()

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ts = np.asarray(self.ts, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.xs) <= 0) or (
                self.ts.size > 1 and np.any(np.diff(self.ts) <= 0)):
            raise ValueError("grid must be strictly increasing")
        expected = (self.ts.size, self.xs.size, len(self.names))
        if self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {expected}")

    @property
    def ncomp(self) -> int:
        return len(self.names)

    def eval(self, x, t, method: str = "linear") -> np.ndarray:
        """Interpolate the field at (x, t); exact at grid nodes."""
        interp = RegularGridInterpolator(
            (self.ts, self.xs), self.values, method=method,
            bounds_error=True)
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        pts = np.stack(np.broadcast_arrays(t, x), axis=-1)
        return interp(pts)

    def write(self, path) -> None:
        nt, nx, nc = self.values.shape
        meta = dict(self.meta)
        meta.update({"nx": nx, "nt": nt,
                     "names": list(self.names),
                     "residual_names": list(self.residual_names)})
        with open(path, "w") as fh:
            fh.write(f"{MAGIC} {FORMAT_VERSION}\n")
            fh.write("meta " + json.dumps(meta) + "\n")
            cols = ["x", "t"] + list(self.names) + list(self.residual_names)
            fh.write("columns " + " ".join(cols) + "\n")
            fh.write(f"rows {nt * nx}\n")
            for k in range(nt):
                for j in range(nx):
                    row = [self.xs[j], self.ts[k], *self.values[k, j]]
                    if self.residuals is not None:
                        row.extend(self.residuals[k, j])
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write("end\n")

    @classmethod
    def read(cls, path) -> "SolutionField":
        with open(path) as fh:
            lines = fh.read().splitlines()

        def fail(lineno, msg):
            raise ConfigError(f"{path}:{lineno + 1}: {msg}")

        if not lines:
            fail(0, "empty field file")
        head = lines[0].split()
        if len(head) != 2 or head[0] != MAGIC:
            fail(0, f"missing magic string {MAGIC!r}")
        if int(head[1]) != FORMAT_VERSION:
            fail(0, f"unsupported format version {head[1]}")
        if len(lines) < 4:
            fail(len(lines) - 1, "truncated header")
        if not lines[1].startswith("meta "):
            fail(1, "expected 'meta' line")
        try:
            meta = json.loads(lines[1][5:])
        except json.JSONDecodeError as exc:
            fail(1, f"bad meta JSON: {exc}")
        if not lines[2].startswith("columns "):
            fail(2, "expected 'columns' line")
        cols = lines[2].split()[1:]
        if cols[:2] != ["x", "t"]:
            fail(2, "first columns must be x and t")
        if not lines[3].startswith("rows "):
            fail(3, "expected 'rows' line")
        nrows = int(lines[3].split()[1])
        names = tuple(meta.get("names", []))
        res_names = tuple(meta.get("residual_names", []))
        if list(cols[2:]) != list(names) + list(res_names):
            fail(2, "columns disagree with meta names")
        nx, nt = int(meta["nx"]), int(meta["nt"])
        if nrows != nx * nt:
            fail(3, f"rows {nrows} != nx*nt = {nx * nt}")
        if len(lines) < 4 + nrows + 1:
            fail(len(lines) - 1,
                 f"truncated data: expected {nrows} rows, "
                 f"got {max(0, len(lines) - 5)}")
        if lines[4 + nrows] != "end":
            fail(4 + nrows, "missing 'end' sentinel")
        data = np.empty((nrows, len(cols)))
        for r in range(nrows):
            parts = lines[4 + r].split()
            if len(parts) != len(cols):
                fail(4 + r, f"expected {len(cols)} columns, got {len(parts)}")
            try:
                data[r] = [float(p) for p in parts]
            except ValueError as exc:
                fail(4 + r, f"bad float: {exc}")
        xs = data[:nx, 0]
        ts = data[::nx, 1]
        values = data[:, 2:2 + len(names)].reshape(nt, nx, len(names))
        residuals = None
        if res_names:
            residuals = data[:, 2 + len(names):].reshape(nt, nx,
                                                         len(res_names))
        # cross-check grid regularity against the row coordinates
        xx = np.tile(xs, nt)
        tt = np.repeat(ts, nx)
        if not (np.array_equal(xx, data[:, 0]) and
                np.array_equal(tt, data[:, 1])):
            fail(4, "rows are not a regular x-major grid")
        return cls(xs=xs, ts=ts, values=values, names=names, meta=meta,
                   residuals=residuals, residual_names=res_names)


@dataclass
class ResidualEntry:
    name: str
    max: float
    l2: float
    arg_x: float
    arg_t: float

    def to_dict(self):
        return {"name": self.name, "max": self.max, "l2": self.l2,
                "argmax": {"x": self.arg_x, "t": self.arg_t}}


@dataclass
class ResidualReport:
    entries: list
    meta: dict = field(default_factory=dict)

    @property
    def max(self) -> float:
        return max((e.max for e in self.entries), default=0.0)

    def entry(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self):
        return {"meta": self.meta,
                "entries": [e.to_dict() for e in self.entries],
                "max": self.max}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _summarize(name, grid, xs, ts) -> ResidualEntry:
    flat = np.abs(grid)
    k, j = np.unravel_index(np.argmax(flat), flat.shape)
    return ResidualEntry(name=name,
                         max=float(flat[k, j]),
                         l2=float(np.sqrt(np.mean(grid ** 2))),
                         arg_x=float(xs[j]), arg_t=float(ts[k]))


def pde_residual(fieldobj: SolutionField, sys) -> ResidualReport:
    """Residual of U_t + A(U) U_x - B(U) with O(h^2) central differences on
    interior grid nodes."""
    xs, ts, vals = fieldobj.xs, fieldobj.ts, fieldobj.values
    if xs.size < 3 or ts.size < 3:
        raise ValueError("need at least a 3x3 grid for interior residuals")
    dx = xs[1] - xs[0]
    dt = ts[1] - ts[0]
    Ux = (vals[:, 2:, :] - vals[:, :-2, :]) / (2.0 * dx)
    Ut = (vals[2:, :, :] - vals[:-2, :, :]) / (2.0 * dt)
    inner = vals[1:-1, 1:-1, :]
    Ux = Ux[1:-1]
    Ut = Ut[:, 1:-1]
    res = np.empty_like(inner)
    nt_i, nx_i, _ = inner.shape
    if sys.apply_A_batch is not None and sys.B_batch is not None:
        flatU = inner.reshape(-1, fieldobj.ncomp)
        flatUx = Ux.reshape(-1, fieldobj.ncomp)
        res = (Ut.reshape(-1, fieldobj.ncomp)
               + sys.apply_A_batch(flatU, flatUx)
               - sys.B_batch(flatU)).reshape(inner.shape)
    else:
        for k in range(nt_i):
            for j in range(nx_i):
                U = inner[k, j]
                res[k, j] = Ut[k, j] + np.asarray(sys.A(U)) @ Ux[k, j] \
                    - np.asarray(sys.B(U))
        res = res.reshape(inner.shape)
    entries = [_summarize(f"eq_{name}", res[:, :, c], xs[1:-1], ts[1:-1])
               for c, name in enumerate(fieldobj.names)]
    return ResidualReport(entries=entries,
                          meta={"dx": dx, "dt": dt, "scheme": "central-O(h2)"})


def compare_fields(a: SolutionField, b: SolutionField) -> ResidualReport:
    """Max/L2 statistics of a - b on the common grid (must match exactly)."""
    if a.names != b.names:
        raise ConfigError("fields have different component names")
    if a.xs.shape != b.xs.shape or a.ts.shape != b.ts.shape or \
            not (np.allclose(a.xs, b.xs) and np.allclose(a.ts, b.ts)):
        raise ConfigError("fields are on different grids")
    diff = a.values - b.values
    entries = [_summarize(f"diff_{name}", diff[:, :, c], a.xs, a.ts)
               for c, name in enumerate(a.names)]
    return ResidualReport(entries=entries, meta={"kind": "field-difference"})
