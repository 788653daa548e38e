"""Configuration-driven parameter sweeps of the preconditioned solver."""

import csv
import io
import logging
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..coarse import build_coarse_basis
from ..decomp import classify_interface, grow_overlap, import_partition, partition_graph, partition_structured
from ..errors import ConfigError, NoConvergenceError, VemSchwarzError
from ..mesh import generate_cubic_mesh, generate_hexprism_mesh, generate_voronoi_mesh, import_mesh
from ..mesh.io import _write_atomic
from ..schwarz import SchwarzPreconditioner, pcg
from ..vem3d import assemble
from .rho import sample_rho
from .vtk import export_vtk

log = logging.getLogger(__name__)

CSV_HEADER = ["sweep", "value", "dofs", "V0", "iters", "kappa", "t_assemble", "t_coarse", "t_factor", "t_pcg"]
SWEEP_KINDS = ("none", "N", "Hdelta", "Hh")


def _parse_number(text):
    v = float(text)
    return int(v) if v.is_integer() else v


def _exact_int(x, what):
    r = round(x)
    if r < 1 or abs(x - r) > 1e-9:
        raise ConfigError(f"{what} = {x:g} is not a positive integer")
    return int(r)


def _icbrt(n):
    r = round(n ** (1.0 / 3.0))
    return r if r**3 == n else None


@dataclass(frozen=True)
class SweepPoint:
    value: object
    n: int
    partition: str
    layers: int


@dataclass
class ExperimentConfig:
    """One experiment: a base configuration and an optional parameter sweep.

    ``mesh`` is ``cubes``, ``voronoi``, ``hexprism`` or ``file:PATH``.
    ``partition`` is ``structured:M``, ``graph:N`` or ``file:PATH``.
    ``sweep`` is ``none`` or ``KIND:v1,v2,...`` with KIND one of ``N``,
    ``Hdelta``, ``Hh``; the two parameters not swept are held at their base
    values.
    """

    mesh: str = "cubes"
    n: int = 8
    partition: str = "structured:2"
    layers: int = 1
    rho: str = "one"
    rho_min: float = 1.0
    rho_max: float = 1e3
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 500
    sweep: str = "none"
    jitter: float = 0.3
    csv: str = None
    vtk: str = None
    timings: bool = True
    _points: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    # -- parsing -----------------------------------------------------------

    @property
    def mesh_family(self):
        return "file" if self.mesh.startswith("file:") else self.mesh

    @property
    def partition_kind(self):
        return self.partition.split(":", 1)[0]

    @property
    def partition_arg(self):
        kind, _, arg = self.partition.partition(":")
        return arg

    @property
    def sweep_kind(self):
        return self.sweep.split(":", 1)[0]

    @property
    def sweep_values(self):
        if self.sweep_kind == "none":
            return []
        return [_parse_number(v) for v in self.sweep.split(":", 1)[1].split(",") if v.strip()]

    def validate(self):
        if self.mesh_family not in ("cubes", "voronoi", "hexprism", "file"):
            raise ConfigError(f"unknown mesh family {self.mesh!r}")
        if self.partition_kind not in ("structured", "graph", "file"):
            raise ConfigError(f"unknown partition {self.partition!r}")
        for label, spec, kind in (("mesh", self.mesh, self.mesh_family), ("partition", self.partition, self.partition_kind)):
            if kind == "file" and not os.path.isfile(spec.split(":", 1)[1]):
                raise ConfigError(f"{label} file {spec.split(':', 1)[1]!r} does not exist")
        if self.partition_kind in ("structured", "graph"):
            try:
                k = int(self.partition_arg)
            except ValueError:
                raise ConfigError(f"partition {self.partition!r} needs an integer") from None
            if k < 1:
                raise ConfigError("partition size must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be a positive integer")
        if int(self.layers) != self.layers or self.layers < 0:
            raise ConfigError("layers must be a non-negative integer")
        if self.rho not in ("one", "disc", "discontinuous"):
            raise ConfigError(f"unknown rho mode {self.rho!r}")
        if not (self.rho_min > 0 and self.rho_max >= self.rho_min):
            raise ConfigError("rho range must satisfy 0 < rho_min <= rho_max")
        if not (self.tol > 0):
            raise ConfigError("tol must be positive")
        if not (0 <= self.jitter < 0.5):
            raise ConfigError("jitter must lie in [0, 0.5)")
        if self.sweep_kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep {self.sweep!r}")
        if self.sweep_kind != "none" and not self.sweep_values:
            raise ConfigError("sweep needs at least one value")
        self.n, self.layers = int(self.n), int(self.layers)
        self._points = self._compute_points()

    # -- sweep arithmetic --------------------------------------------------

    def _base_parts(self):
        if self.partition_kind == "structured":
            return int(self.partition_arg) ** 3
        if self.partition_kind == "graph":
            return int(self.partition_arg)
        return None

    def nominal_ratios(self, n=None, partition=None, layers=None):
        """``(H/h, H/delta)`` for structured boxes; exact for cubes, nominal otherwise."""
        n = self.n if n is None else n
        layers = self.layers if layers is None else layers
        partition = self.partition if partition is None else partition
        kind, _, arg = partition.partition(":")
        if kind == "structured":
            m = int(arg)
        elif kind == "graph":
            m = int(arg) ** (1.0 / 3.0)
        else:
            return float("nan"), float("nan")
        Hh = n / m
        return Hh, (Hh / layers if layers else float("inf"))

    def _compute_points(self):
        kind, values = self.sweep_kind, self.sweep_values
        base = SweepPoint("", self.n, self.partition, self.layers)
        if kind == "none":
            return [base]
        if self.mesh_family == "file" and kind in ("N", "Hh"):
            raise ConfigError("a mesh file fixes h, so only Hdelta sweeps are possible")
        if self.partition_kind == "file" and kind in ("N", "Hh"):
            raise ConfigError("a partition file fixes N, so only Hdelta sweeps are possible")
        structured = self.partition_kind == "structured"
        if structured:
            m = int(self.partition_arg)
            Hh = _exact_int(self.n / m, "H/h = n/m")
            if kind != "Hdelta" and self.layers == 0:
                raise ConfigError("layers = 0 gives no finite H/delta to hold fixed")
            Hd = Hh / self.layers if self.layers else None
        else:
            Nb = self._base_parts()
            Hh = self.n / Nb ** (1.0 / 3.0) if Nb else None
        pts = []
        for v in values:
            if kind == "N":
                if structured:
                    mm = _icbrt(_exact_int(v, "N"))
                    if mm is None:
                        raise ConfigError(f"N = {v} is not a perfect cube, needed for a structured partition")
                    pts.append(SweepPoint(v, mm * Hh, f"structured:{mm}", self.layers))
                else:
                    pts.append(SweepPoint(v, self.n, f"graph:{_exact_int(v, 'N')}", self.layers))
            elif kind == "Hdelta":
                if structured:
                    pts.append(SweepPoint(v, self.n, self.partition, _exact_int(Hh / v, "layers = (H/h)/(H/delta)")))
                else:
                    ref = Hh if Hh is not None else float(self.layers)
                    pts.append(SweepPoint(v, self.n, self.partition, max(1, round(ref / v))))
            else:
                if structured:
                    hh = _exact_int(v, "H/h")
                    pts.append(SweepPoint(v, m * hh, self.partition, _exact_int(hh / Hd, "layers = (H/h)/(H/delta)")))
                else:
                    n_new = max(1, round(float(v) * Nb ** (1.0 / 3.0)))
                    pts.append(SweepPoint(v, n_new, self.partition, self.layers))
        return pts

    @property
    def points(self):
        return list(self._points)

    # -- config files ------------------------------------------------------

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls) if not f.name.startswith("_")]

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string (or typed) values keyed by field name; dashes allowed."""
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in mapping.items():
            name = key.replace("-", "_")
            if name not in types or name.startswith("_"):
                raise ConfigError(f"unknown configuration key {key!r}")
            kw[name] = _coerce(name, raw, types[name])
        return cls(**kw)

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _coerce(name, raw, typ):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ in (int, "int"):
            return _exact_int(float(text), name) if name not in ("seed", "layers") else int(float(text))
        if typ in (float, "float"):
            return float(text)
        if typ in (bool, "bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None
    return text or None


def read_config_file(path):
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


# ---------------------------------------------------------------------------
# running


@dataclass
class ResultRow:
    sweep: str
    value: object
    dofs: int = 0
    V0: int = 0
    iters: int = 0
    kappa: float = float("nan")
    t_assemble: float = 0.0
    t_coarse: float = 0.0
    t_factor: float = 0.0
    t_pcg: float = 0.0
    converged: bool = False
    error: str = None
    Hh: float = float("nan")
    Hdelta: float = float("nan")

    @property
    def ok(self):
        return self.error is None

    def csv_fields(self, timings=True):
        def t(v):
            return f"{v:.4f}" if timings else "0"

        if not self.ok:
            return [self.sweep, str(self.value), str(self.dofs), str(self.V0), "", "", "", "", "", ""]
        return [
            self.sweep,
            str(self.value),
            str(self.dofs),
            str(self.V0),
            str(self.iters),
            f"{self.kappa:.10g}",
            t(self.t_assemble),
            t(self.t_coarse),
            t(self.t_factor),
            t(self.t_pcg),
        ]


def build_mesh(config, n):
    fam = config.mesh_family
    if fam == "cubes":
        return generate_cubic_mesh(n)
    if fam == "voronoi":
        return generate_voronoi_mesh(n, jitter=config.jitter, rng_seed=config.seed)
    if fam == "hexprism":
        return generate_hexprism_mesh(n, n)
    return import_mesh(config.mesh.split(":", 1)[1])


def build_partition(mesh, spec, seed=0):
    kind, _, arg = spec.partition(":")
    if kind == "structured":
        return partition_structured(mesh, int(arg))
    if kind == "graph":
        return partition_graph(mesh, int(arg), rng_seed=seed)
    return import_partition(arg, mesh)


@dataclass
class PointState:
    """Everything built for one sweep point, for inspection and output."""

    mesh: object
    partition: object
    system: object
    classification: object
    coarse: object
    overlap: object
    preconditioner: object
    result: object
    rho: np.ndarray


def run_point(config, point, mesh_cache=None):
    """Build and solve one sweep point; returns ``(ResultRow, PointState)``."""
    row = ResultRow(config.sweep_kind, point.value)
    row.Hh, row.Hdelta = config.nominal_ratios(point.n, point.partition, point.layers)
    key = point.n
    if mesh_cache is not None and key in mesh_cache:
        mesh = mesh_cache[key]
    else:
        mesh = build_mesh(config, point.n)
        if mesh_cache is not None:
            mesh_cache.clear()
            mesh_cache[key] = mesh
    part = build_partition(mesh, point.partition, config.seed)
    rho = sample_rho(part, config.rho, (config.rho_min, config.rho_max), config.seed)

    t0 = time.perf_counter()
    system = assemble(mesh, rho=rho, partition=part)
    row.dofs = system.n_dofs
    t1 = time.perf_counter()
    cls = classify_interface(mesh, part)
    coarse = build_coarse_basis(mesh, system, part, cls)
    row.V0 = coarse.dim
    t2 = time.perf_counter()
    overlap = grow_overlap(mesh, part, point.layers, system.free_index)
    M = SchwarzPreconditioner(system.A, overlap.interior_dofs, coarse.R0T)
    t3 = time.perf_counter()
    try:
        res = pcg(system.A, system.b, M, tol=config.tol, max_iter=config.max_iter)
    except NoConvergenceError as exc:
        res = exc.result
        row.error = str(exc)
    t4 = time.perf_counter()
    row.iters, row.kappa, row.converged = res.iterations, res.kappa, res.converged
    row.t_assemble, row.t_coarse, row.t_factor, row.t_pcg = t1 - t0, t2 - t1, t3 - t2, t4 - t3
    return row, PointState(mesh, part, system, cls, coarse, overlap, M, res, rho)


def format_table(rows):
    head = ["sweep", "value", "H/h", "H/delta", "dofs", "V0", "iters", "kappa", "time[s]"]
    body = []
    for r in rows:
        total = r.t_assemble + r.t_coarse + r.t_factor + r.t_pcg
        if r.ok:
            body.append(
                [r.sweep, str(r.value), f"{r.Hh:.3g}", f"{r.Hdelta:.3g}", str(r.dofs), str(r.V0),
                 str(r.iters), f"{r.kappa:.2f}", f"{total:.2f}"]
            )
        else:
            body.append([r.sweep, str(r.value), f"{r.Hh:.3g}", f"{r.Hdelta:.3g}", str(r.dofs), str(r.V0),
                         "FAILED", r.error or "", ""])
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def csv_text(rows, timings=True):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields(timings))
    return out.getvalue()


def _vtk_path(path, k, total):
    if total == 1:
        return path
    root, dot, ext = path.rpartition(".")
    return f"{root}_{k}.{ext}" if dot else f"{path}_{k}"


def write_point_vtk(state, path):
    """Solution, coarse-basis sum and the coarse function nearest the domain centre."""
    mesh, system = state.mesh, state.system
    fields_ = {"u": system.expand(state.result.x)}
    cb = state.coarse
    if cb.dim:
        fields_["coarse_sum"] = system.expand(np.asarray(cb.R0T.sum(axis=1)).ravel())
        centre = np.argmin(np.linalg.norm(mesh.vertices[cb.vertices] - 0.5, axis=1))
        fields_["phi_center"] = cb.nodal(int(centre), system)
    export_vtk(mesh, fields_, path, subdomain=state.partition.subdomain_of, rho=system.cell_rho)


def run_experiment(config, out=None):
    """Run every sweep point; returns the list of :class:`ResultRow`.

    A failing point produces a row with ``error`` set and the sweep goes on.
    The table is printed to ``out`` when given; CSV and VTK files are written
    when the config names them.
    """
    rows = []
    cache = {}
    points = config.points
    for k, point in enumerate(points):
        try:
            row, state = run_point(config, point, cache)
            if config.vtk:
                write_point_vtk(state, _vtk_path(config.vtk, k, len(points)))
        except (VemSchwarzError, ValueError, np.linalg.LinAlgError, MemoryError, OSError) as exc:
            log.error("sweep point %s failed: %s", point.value, exc)
            row = ResultRow(config.sweep_kind, point.value, error=f"{type(exc).__name__}: {exc}")
            row.Hh, row.Hdelta = config.nominal_ratios(point.n, point.partition, point.layers)
        rows.append(row)
        if out is not None and len(points) > 1:
            print(f"[{k + 1}/{len(points)}] {point.value}: " + ("ok" if row.ok else row.error), file=out)
    if out is not None:
        print(format_table(rows), file=out)
    if config.csv:
        _write_atomic(config.csv, csv_text(rows, config.timings))
    return rows

