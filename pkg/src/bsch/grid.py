"""Periodic-strip geometry and discrete operators.

The domain is the strip ``[0, lx) x [0, ly]``, periodic in x.  Bulk nodes sit
at ``(i*hx, j*hy)`` for ``i < nx``, ``j < ny``; the rows ``j = 0`` and
``j = ny-1`` double as the two boundary rings (bottom ring 0 with outward
normal ``-e_y``, top ring 1 with ``+e_y``).

Bulk fields are arrays of shape ``(ny, nx)``, surface fields ``(2, nx)``.

Quadrature is trapezoidal in y and periodic-rectangle in x, so the
five-point Laplacian with mirror ghosts is self-adjoint in the weighted inner
product and the discrete divergence theorem holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError

__all__ = [
    "Grid",
    "laplace_bulk",
    "laplace_surface",
    "normal_derivative",
    "integrate_bulk",
    "integrate_surface",
    "mean_bulk",
    "mean_surface",
    "project_zero_mean_bulk",
    "project_zero_mean_surface",
    "dirichlet_energy_bulk",
    "dirichlet_energy_surface",
    "inner_bulk",
    "inner_surface",
    "trace",
    "write_field",
    "read_field",
    "format_field",
    "parse_field",
]


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 4:
            raise ValueError(f"nx must be >= 4, got {self.nx}")
        if self.ny < 4:
            raise ValueError(f"ny must be >= 4, got {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("lx and ly must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def bulk_shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def surf_shape(self) -> tuple[int, int]:
        return (2, self.nx)

    @property
    def n_bulk(self) -> int:
        return self.nx * self.ny

    @property
    def n_surf(self) -> int:
        return 2 * self.nx

    @cached_property
    def row_weight(self) -> np.ndarray:
        """Trapezoid weights in y, shape ``(ny, 1)``."""
        w = np.full((self.ny, 1), self.hy)
        w[0] = w[-1] = 0.5 * self.hy
        return w

    @cached_property
    def bulk_weights(self) -> np.ndarray:
        w = np.broadcast_to(self.hx * self.row_weight, self.bulk_shape).copy()
        w.flags.writeable = False
        return w

    @property
    def surf_weight(self) -> float:
        return self.hx

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def perimeter(self) -> float:
        return 2.0 * self.lx

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y)

    def ring_x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    def zeros_bulk(self) -> np.ndarray:
        return np.zeros(self.bulk_shape)

    def zeros_surf(self) -> np.ndarray:
        return np.zeros(self.surf_shape)

    def check_bulk(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.bulk_shape:
            raise DimensionError(f"bulk field has shape {u.shape}, grid expects {self.bulk_shape}")
        return u

    def check_surf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != self.surf_shape:
            raise DimensionError(f"surface field has shape {v.shape}, grid expects {self.surf_shape}")
        return v

    # sparse operators (flattened row-major) --------------------------------

    @cached_property
    def laplace_bulk_matrix(self) -> sp.csr_matrix:
        """No-flux five-point Laplacian acting on ``u.ravel()``."""
        nx, ny = self.nx, self.ny
        dxx = _periodic_second_difference(nx) / self.hx**2
        main = -2.0 * np.ones(ny)
        up = np.ones(ny - 1)
        low = np.ones(ny - 1)
        up[0] = 2.0  # mirror ghost at the bottom row
        low[-1] = 2.0  # and at the top row
        dyy = sp.diags([low, main, up], [-1, 0, 1]) / self.hy**2
        return (sp.kron(sp.identity(ny), dxx) + sp.kron(dyy, sp.identity(nx))).tocsr()

    @cached_property
    def laplace_surface_matrix(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(2), _periodic_second_difference(self.nx) / self.hx**2).tocsr()

    @cached_property
    def trace_matrix(self) -> sp.csr_matrix:
        """Extracts the two boundary rows: shape ``(n_surf, n_bulk)``."""
        nx, ny = self.nx, self.ny
        rows = np.arange(2 * nx)
        cols = np.concatenate([np.arange(nx), (ny - 1) * nx + np.arange(nx)])
        return sp.csr_matrix((np.ones(2 * nx), (rows, cols)), shape=(2 * nx, nx * ny))

    @cached_property
    def flux_matrix(self) -> sp.csr_matrix:
        """Ghost contribution of a prescribed outward flux: ``(2/hy) * trace^T``."""
        return (self.trace_matrix.T * (2.0 / self.hy)).tocsr()


def _periodic_second_difference(n: int) -> sp.csr_matrix:
    m = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]).tolil()
    m[0, n - 1] = 1.0
    m[n - 1, 0] = 1.0
    return m.tocsr()


def trace(g: Grid, u) -> np.ndarray:
    """Boundary rows of a bulk field as a surface field."""
    u = g.check_bulk(u)
    return np.stack([u[0], u[-1]])


def _dxx(u, h):
    return (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / h**2


def laplace_bulk(g: Grid, u, flux=None) -> np.ndarray:
    """Five-point Laplacian, periodic in x, with flux boundary rows.

    Parameters
    ----------
    g : Grid
    u : ndarray, shape (ny, nx)
    flux : ndarray, shape (2, nx), optional
        Outward normal derivative imposed through mirror ghosts.  ``None``
        means no flux.

    Returns
    -------
    ndarray, shape (ny, nx)
    """
    u = g.check_bulk(u)
    out = _dxx(u, g.hx)
    hy2 = g.hy**2
    out[1:-1] += (u[2:] - 2.0 * u[1:-1] + u[:-2]) / hy2
    out[0] += 2.0 * (u[1] - u[0]) / hy2
    out[-1] += 2.0 * (u[-2] - u[-1]) / hy2
    if flux is not None:
        flux = g.check_surf(flux)
        out[0] += 2.0 * flux[0] / g.hy
        out[-1] += 2.0 * flux[1] / g.hy
    return out


def laplace_surface(g: Grid, v) -> np.ndarray:
    """Periodic three-point Laplacian on each ring."""
    v = g.check_surf(v)
    return _dxx(v, g.hx)


def normal_derivative(g: Grid, u) -> np.ndarray:
    """Second-order one-sided outward normal derivative on both rings."""
    u = g.check_bulk(u)
    h2 = 2.0 * g.hy
    bottom = (3.0 * u[0] - 4.0 * u[1] + u[2]) / h2
    top = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / h2
    return np.stack([bottom, top])


def integrate_bulk(g: Grid, u) -> float:
    return float(np.sum(g.bulk_weights * g.check_bulk(u)))


def integrate_surface(g: Grid, v) -> float:
    return float(g.hx * np.sum(g.check_surf(v)))


def mean_bulk(g: Grid, u) -> float:
    return integrate_bulk(g, u) / g.area


def mean_surface(g: Grid, v) -> float:
    return integrate_surface(g, v) / g.perimeter


def project_zero_mean_bulk(g: Grid, u) -> np.ndarray:
    return g.check_bulk(u) - mean_bulk(g, u)


def project_zero_mean_surface(g: Grid, v) -> np.ndarray:
    return g.check_surf(v) - mean_surface(g, v)


def inner_bulk(g: Grid, u, w) -> float:
    return float(np.sum(g.bulk_weights * g.check_bulk(u) * g.check_bulk(w)))


def inner_surface(g: Grid, v, z) -> float:
    return float(g.hx * np.sum(g.check_surf(v) * g.check_surf(z)))


def dirichlet_energy_bulk(g: Grid, u) -> float:
    """Half the squared discrete gradient norm of a bulk field.

    x-differences carry the trapezoid row weights, y-differences the full
    cell weight; this is the quadratic form of the no-flux Laplacian.
    """
    u = g.check_bulk(u)
    ex = np.sum(g.hx * g.row_weight * ((np.roll(u, -1, axis=1) - u) / g.hx) ** 2)
    ey = np.sum(g.hx * g.hy * (np.diff(u, axis=0) / g.hy) ** 2)
    return 0.5 * float(ex + ey)


def dirichlet_energy_surface(g: Grid, v) -> float:
    v = g.check_surf(v)
    return 0.5 * float(np.sum(g.hx * ((np.roll(v, -1, axis=1) - v) / g.hx) ** 2))


# ---------------------------------------------------------------------------
# text snapshots

_MAGIC = "BSCH-FIELD v1"


def format_field(g: Grid, values) -> str:
    values = np.asarray(values, dtype=float)
    if values.shape == g.surf_shape:
        ny_tag = "ring"
    else:
        g.check_bulk(values)
        ny_tag = str(g.ny)
    head = f"{_MAGIC} nx={g.nx} ny={ny_tag} lx={g.lx!r} ly={g.ly!r}"
    rows = (" ".join(format(x, ".17g") for x in row) for row in values)
    return "\n".join([head, *rows]) + "\n"


def parse_field(text: str) -> tuple[dict, np.ndarray]:
    """Parse a snapshot into its header (``nx``, ``ny``, ``lx``, ``ly``) and values.

    ``ny`` is the string ``"ring"`` for surface snapshots.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_MAGIC + " "):
        raise ValueError("line 1: missing 'BSCH-FIELD v1' header")
    meta = {}
    for tok in lines[0][len(_MAGIC) + 1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ValueError(f"line 1: malformed header token {tok!r}")
        meta[key] = val
    try:
        nx = int(meta["nx"])
        ring = meta["ny"] == "ring"
        ny = None if ring else int(meta["ny"])
        lx = float(meta["lx"])
        ly = float(meta["ly"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"line 1: bad header ({exc})") from None
    expect_rows = 2 if ring else ny
    body = [ln for ln in lines[1:]]
    if len(body) != expect_rows:
        raise ValueError(f"expected {expect_rows} data rows, found {len(body)}")
    data = np.empty((expect_rows, nx))
    for k, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != nx:
            raise ValueError(f"line {k + 2}: expected {nx} values, found {len(parts)}")
        try:
            data[k] = [float(x) for x in parts]
        except ValueError as exc:
            raise ValueError(f"line {k + 2}: {exc}") from None
    return {"nx": nx, "ny": "ring" if ring else ny, "lx": lx, "ly": ly}, data


def write_field(path, g: Grid, values) -> None:
    Path(path).write_text(format_field(g, values))


def read_field(path) -> tuple[dict, np.ndarray]:
    return parse_field(Path(path).read_text())
