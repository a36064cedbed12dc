"""File formats: voxel arrays, sphere packs, run configs, CSV tables.

The voxel format is a self-describing ASCII key=value header followed by a
raw little-endian payload.  Voxels are laid out axis-0-fastest with the
per-voxel components contiguous, i.e. linear index ((..i2)*N + i1)*N + i0
times m plus the component; phase maps are unsigned bytes, fields are IEEE
doubles.  Reads reproduce writes bit-for-bit.

Run configs and sphere packs are line-based text; floats round-trip through
repr, so a rerun from a written config reproduces the original run exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .elasticity import parse_plane, shear_loading
from .green import ReferenceMedium, VARIANTS, field_components
from .grid import Grid, make_grid
from .microstructure import PhaseTensor, SpherePack

MAGIC = "voxhom-voxels"
VERSION = 1
KIND_PHASE = "phase-index"
KIND_FIELD = "real-field"

ENV_OUT = "VOXHOM_OUT"
ENV_THREADS = "VOXHOM_THREADS"


class FormatError(ValueError):
    """Malformed voxel/pack/config file."""


def _header_bytes(pairs) -> bytes:
    body = "".join("%s=%s\n" % kv for kv in pairs)
    # the offset line has fixed width, so its own length is stable
    return (body + "offset=%08d\n").encode("ascii")


def _to_wire(array: np.ndarray, d: int) -> np.ndarray:
    # axis-0-fastest: reverse the spatial axes, keep components innermost
    spatial = tuple(range(d - 1, -1, -1))
    extra = tuple(range(d, array.ndim))
    return np.ascontiguousarray(array.transpose(spatial + extra))


def write_voxel_file(path, grid: Grid, array: np.ndarray, kind: str) -> None:
    if kind == KIND_PHASE:
        array = np.ascontiguousarray(array, dtype=np.uint8)
        if array.shape != grid.shape:
            raise FormatError("phase map shape %s does not match the grid"
                              % (array.shape,))
        m = 1
        wire = _to_wire(array, grid.d)
    elif kind == KIND_FIELD:
        array = np.ascontiguousarray(array, dtype="<f8")
        if array.ndim != grid.d + 1 or array.shape[:-1] != grid.shape:
            raise FormatError("field shape %s does not match the grid"
                              % (array.shape,))
        m = array.shape[-1]
        wire = _to_wire(array, grid.d)
    else:
        raise FormatError("unknown voxel kind %r" % kind)
    pairs = [("magic", MAGIC), ("version", VERSION), ("d", grid.d),
             ("n", grid.n), ("kind", kind), ("m", m), ("byteorder", "little")]
    template = _header_bytes(pairs)
    offset = len(template % 0)  # %08d is width-stable for any sane header
    with open(path, "wb") as fh:
        fh.write(template % offset)
        fh.write(wire.tobytes())


def read_voxel_file(path):
    """Returns (grid, array, kind); arrays come back exactly as written."""
    with open(path, "rb") as fh:
        head = {}
        offset = None
        while True:
            line = fh.readline()
            if not line:
                raise FormatError("truncated header in %s" % path)
            try:
                key, value = line.decode("ascii").strip().split("=", 1)
            except ValueError:
                raise FormatError("bad header line %r in %s" % (line, path))
            head[key] = value
            if key == "offset":
                offset = int(value)
                break
        if head.get("magic") != MAGIC:
            raise FormatError("%s is not a voxel file" % path)
        if int(head.get("version", -1)) != VERSION:
            raise FormatError("unsupported voxel file version %s"
                              % head.get("version"))
        if head.get("byteorder") != "little":
            raise FormatError("unsupported byte order %s" % head.get("byteorder"))
        grid = make_grid(int(head["d"]), int(head["n"]))
        kind = head["kind"]
        m = int(head["m"])
        fh.seek(offset)
        payload = fh.read()
    if kind == KIND_PHASE:
        dtype, shape = np.dtype("u1"), grid.shape
    elif kind == KIND_FIELD:
        dtype, shape = np.dtype("<f8"), grid.shape + (m,)
    else:
        raise FormatError("unknown voxel kind %r in %s" % (kind, path))
    want = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != want:
        raise FormatError("payload of %s holds %d bytes, header promises %d"
                          % (path, len(payload), want))
    wire_shape = tuple(reversed(grid.shape)) + ((m,) if kind == KIND_FIELD else ())
    wire = np.frombuffer(payload, dtype=dtype).reshape(wire_shape)
    spatial = tuple(range(grid.d - 1, -1, -1))
    extra = tuple(range(grid.d, wire.ndim))
    return grid, np.ascontiguousarray(wire.transpose(spatial + extra)), kind


def write_sphere_pack(path, pack: SpherePack) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# voxhom sphere pack\n")
        fh.write("count=%d\n" % pack.count)
        fh.write("r=%s\n" % repr(float(pack.r)))
        fh.write("gap=%s\n" % repr(float(pack.gap)))
        fh.write("seed=%s\n" % ("" if pack.seed is None else int(pack.seed)))
        for center in pack.centers:
            fh.write("%s %s %s\n" % tuple(repr(float(c)) for c in center))


def read_sphere_pack(path) -> SpherePack:
    head = {}
    centers = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line and not centers:
                key, value = line.split("=", 1)
                head[key] = value
            else:
                parts = line.split()
                if len(parts) != 3:
                    raise FormatError("bad center line %r in %s" % (line, path))
                centers.append([float(x) for x in parts])
    try:
        count = int(head["count"])
        r = float(head["r"])
        gap = float(head.get("gap", "0.0"))
        seed = int(head["seed"]) if head.get("seed") else None
    except (KeyError, ValueError) as exc:
        raise FormatError("bad sphere pack header in %s: %s" % (path, exc))
    if len(centers) != count:
        raise FormatError("%s lists %d centers, header promises %d"
                          % (path, len(centers), count))
    arr = np.array(centers, dtype=np.float64).reshape(-1, 3)
    return SpherePack(arr, r, gap, seed)


def parse_phase(physics: str, text: str, d: int) -> PhaseTensor:
    """Catalog entry: conduction "a=<float>", elasticity "mu=<f> nu=<f>"."""
    entries = {}
    for token in text.replace(",", " ").split():
        if "=" not in token:
            raise FormatError("bad phase token %r (want key=value)" % token)
        key, value = token.split("=", 1)
        entries[key] = float(value)
    try:
        if physics == "conduction":
            return PhaseTensor.conduction(entries.pop("a"), d=d)
        return PhaseTensor.elasticity(entries.pop("mu"), entries.pop("nu"))
    except KeyError as exc:
        raise FormatError("phase entry %r is missing %s" % (text, exc))


def parse_reference(physics: str, text: str, d: int) -> ReferenceMedium:
    entries = {}
    for token in text.replace(",", " ").split():
        key, value = token.split("=", 1)
        entries[key] = float(value)
    if physics == "conduction":
        if "a" not in entries:
            raise FormatError("conduction reference needs a=<float>")
        return ReferenceMedium.conduction(entries["a"], d=d)
    if "mu" not in entries or "nu" not in entries:
        raise FormatError("elasticity reference needs mu=<float> nu=<float>")
    return ReferenceMedium.elasticity(entries["mu"], entries["nu"])


def parse_loading(physics: str, text: str, d: int) -> np.ndarray:
    """Loading direction: "e1".."e3", "shear=xy", or whitespace components."""
    m = field_components(physics, d)
    text = text.strip()
    if text.startswith("shear="):
        if physics != "elasticity":
            raise FormatError("shear loadings need elasticity physics")
        return shear_loading(d, parse_plane(text.split("=", 1)[1], d))
    if text.startswith("e") and text[1:].isdigit():
        j = int(text[1:])
        if not 1 <= j <= m:
            raise FormatError("loading %s outside 1..%d" % (text, m))
        p = np.zeros(m)
        p[j - 1] = 1.0
        return p
    parts = text.replace(",", " ").split()
    if len(parts) != m:
        raise FormatError("loading needs %d components, got %d" % (m, len(parts)))
    return np.array([float(x) for x in parts])


@dataclass
class RunConfig:
    """Fully-resolved description of one solve/sweep/bench run."""

    physics: str = "conduction"
    micro: str = ""              # voxel-file path with the fine phase map
    phases: list = field(default_factory=list)   # raw catalog entries
    a0: str = ""
    variant: str = "filtered"
    solver: str = "cg"
    rel_tol: float = 1e-5
    max_iter: int = 1000
    loading: str = "e1"
    ns: list = field(default_factory=list)
    out: str = "."
    threads: int = 1
    series_n_max: int = 4
    series_tol: float = 1e-3
    reference_value: float = None  # analytic sweep target, when known

    def validate(self):
        if self.physics not in ("conduction", "elasticity"):
            raise FormatError("unknown physics %r" % self.physics)
        if self.variant not in VARIANTS:
            raise FormatError("unknown variant %r (choose from %s)"
                              % (self.variant, ", ".join(VARIANTS)))
        if self.solver not in ("cg", "fixed-point"):
            raise FormatError("unknown solver %r" % self.solver)
        if not self.phases:
            raise FormatError("config lists no phases")
        if not self.ns:
            raise FormatError("config lists no solve sizes")
        if self.threads < 1:
            raise FormatError("threads must be positive")
        return self

    def green_opts(self) -> dict:
        if self.variant == "consistent":
            return {"n_max": self.series_n_max, "tol": self.series_tol}
        return {}


_INT_KEYS = {"max_iter", "threads", "series_n_max"}
_FLOAT_KEYS = {"rel_tol", "series_tol", "reference_value"}


def read_config(path) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)} - {"phases", "ns"}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError("bad config line %r in %s" % (line, path))
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "phase":  # repeated key, appends to the catalog
                cfg.phases.append(value)
            elif key == "ns":
                cfg.ns = [int(x) for x in value.replace(",", " ").split()]
            elif key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            elif key in names:
                setattr(cfg, key, value)
            else:
                raise FormatError("unknown config key %r in %s" % (key, path))
    return cfg


def write_config(path, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# resolved run configuration\n")
        fh.write("physics=%s\n" % cfg.physics)
        fh.write("micro=%s\n" % cfg.micro)
        for entry in cfg.phases:
            fh.write("phase=%s\n" % entry)
        fh.write("a0=%s\n" % cfg.a0)
        fh.write("variant=%s\n" % cfg.variant)
        fh.write("solver=%s\n" % cfg.solver)
        fh.write("rel_tol=%s\n" % repr(cfg.rel_tol))
        fh.write("max_iter=%d\n" % cfg.max_iter)
        fh.write("loading=%s\n" % cfg.loading)
        fh.write("ns=%s\n" % " ".join(str(n) for n in cfg.ns))
        fh.write("out=%s\n" % cfg.out)
        fh.write("threads=%d\n" % cfg.threads)
        if cfg.variant == "consistent":
            fh.write("series_n_max=%d\n" % cfg.series_n_max)
            fh.write("series_tol=%s\n" % repr(cfg.series_tol))
        if cfg.reference_value is not None:
            fh.write("reference_value=%s\n" % repr(cfg.reference_value))


def apply_env_overrides(cfg: RunConfig, env=None) -> RunConfig:
    """Output dir and thread count yield to the environment when set."""
    env = os.environ if env is None else env
    if env.get(ENV_OUT):
        cfg.out = env[ENV_OUT]
    if env.get(ENV_THREADS):
        cfg.threads = int(env[ENV_THREADS])
    return cfg


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["--" if v is None else v for v in row])


SOLVE_COLUMNS = ["N", "variant", "solver", "iterations", "converged",
                 "residual", "wall_time_s"]


def _cell(value) -> str:
    # repr of a builtin float round-trips; numpy scalars must not leak through
    return repr(float(value))


def solve_csv(path, reports) -> None:
    """One row per solve with the homogenized column inlined."""
    m = len(reports[0].column)
    header = SOLVE_COLUMNS + ["Astar_%d" % j for j in range(m)]
    rows = []
    for rep in reports:
        rows.append([rep.n, rep.variant, rep.solver, rep.iterations,
                     int(rep.converged), _cell(rep.residual),
                     _cell(rep.wall_time)] + [_cell(c) for c in rep.column])
    write_csv(path, header, rows)


def sweep_csv(path, result) -> None:
    header = ["N", "h", "value", "error", "iterations", "converged",
              "residual", "wall_time_s"]
    rows = []
    for row in result.rows:
        err = abs(row.scalar - result.reference_scalar)
        rows.append([row.n, _cell(1.0 / row.n), _cell(row.scalar), _cell(err),
                     row.iterations, int(row.converged), _cell(row.residual),
                     _cell(row.wall_time)])
    write_csv(path, header, rows)


def bench_csv(path, rows) -> None:
    header = ["N", "P", "iterations", "wall_time_s", "time_ratio", "efficiency"]
    out = []
    for row in rows:
        eff = None if row.efficiency is None else _cell(row.efficiency)
        out.append([row.n, row.threads, row.iterations, _cell(row.wall_time),
                    _cell(row.ratio), eff])
    write_csv(path, header, out)
