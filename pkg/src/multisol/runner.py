"""Run configuration, result bundles, exports and re-validation.

A bundle is a directory::

    config.ini              echo of the run configuration
    summary.csv             one row per record
    records/rec_NNN.txt     coefficient payload, 17 significant digits
    fields/rec_NNN.csv      field samples "r,theta,x,y,u"
    traces/step_one.csv     trust-region trace of the first solve
    continuation/path_NNN.csv and energy.csv   (only with a b-sweep)

Nothing time-dependent is written, so equal configurations give equal bundles.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import logging
import os
import warnings
from dataclasses import dataclass, field, fields
from typing import List, Optional, Tuple

import numpy as np

from .aobd import AOBDConfig, ContinuationPath, SolutionRecord, continue_in_geometry, solve_multiple
from .galerkin import DiscreteProblem, n_dofs
from .geometry import EllipseDomain, map_to_cartesian
from .problems import get_problem
from .rootfind import GridSearchSpec
from .trustregion import HESSIAN_MODES, TrustRegionConfig

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "RunConfig",
    "ResultBundle",
    "load_config",
    "run",
    "write_bundle",
    "load_bundle",
    "read_record",
    "write_record",
    "export_field",
    "export_energy_curves",
    "sweep_bundle",
    "load_paths",
    "validate",
]


class ConfigError(ValueError):
    pass


# (section, key, attribute) for every RunConfig field that lives in the ini file
_LAYOUT = [
    ("problem", "name", "problem"),
    ("problem", "lambda", "lam"),
    ("problem", "delta", "delta"),
    ("problem", "bc", "bc"),
    ("domain", "a", "a"),
    ("domain", "b", "b"),
    ("resolution", "M", "M"),
    ("resolution", "N", "N"),
    ("solver", "eps_g", "eps_g"),
    ("solver", "eps_v", "eps_v"),
    ("solver", "ftol", "ftol"),
    ("solver", "max_iter", "max_iter"),
    ("solver", "hessian_mode", "hessian_mode"),
    ("solver", "record_tol", "record_tol"),
    ("basis", "max_basis", "max_basis"),
    ("basis", "starts_per_round", "starts_per_round"),
    ("basis", "max_rounds", "max_rounds"),
    ("basis", "inner_product", "inner_product"),
    ("basis", "search_lo", "search_lo"),
    ("basis", "search_hi", "search_hi"),
    ("basis", "search_points", "search_points"),
    ("basis", "seed_resolution", "seed_resolution"),
    ("sweep", "b_end", "b_end"),
    ("sweep", "steps", "sweep_steps"),
    ("sweep", "reference", "reference"),
    ("output", "directory", "output"),
    ("output", "field_nr", "field_nr"),
    ("output", "field_ntheta", "field_ntheta"),
    ("run", "seed", "seed"),
]


@dataclass
class RunConfig:
    problem: str = "sine-gordon"
    lam: float = 30.0
    delta: float = 0.2
    bc: str = "dirichlet"
    a: float = 1.0
    b: float = 1.0
    M: int = 16
    N: int = 16
    eps_g: float = 1e-13
    eps_v: float = 1e-13
    ftol: float = 1e-11
    max_iter: int = 200
    hessian_mode: str = "gauss-newton"
    record_tol: float = 1e-8
    max_basis: int = 8
    starts_per_round: int = 8
    max_rounds: int = 4
    inner_product: str = "l2"
    search_lo: float = -50.0
    search_hi: float = 50.0
    search_points: int = 400
    seed_resolution: Optional[Tuple[int, int]] = None
    b_end: Optional[float] = None
    sweep_steps: int = 0
    reference: Optional[int] = None
    output: str = "results"
    field_nr: int = 11
    field_ntheta: int = 32
    seed: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("eps_g", "eps_v", "record_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.ftol < 0:
            raise ConfigError("ftol must be non-negative")
        if self.M < 1 or self.N < 2:
            raise ConfigError(f"need M >= 1 and N >= 2, got M={self.M}, N={self.N}")
        if not 0 < self.b <= self.a:
            raise ConfigError(f"need 0 < b <= a, got a={self.a}, b={self.b}")
        if self.bc not in ("dirichlet", "neumann"):
            raise ConfigError(f"bc must be dirichlet or neumann, got {self.bc!r}")
        if self.hessian_mode not in HESSIAN_MODES:
            raise ConfigError(f"hessian_mode must be one of {HESSIAN_MODES}")
        if self.inner_product not in ("l2", "mass"):
            raise ConfigError("inner_product must be l2 or mass")
        if self.max_iter < 1 or self.max_basis < 1 or self.search_points < 2:
            raise ConfigError("max_iter, max_basis and search_points must be positive")
        if not self.search_hi > self.search_lo:
            raise ConfigError("search_hi must exceed search_lo")
        if self.sweep_steps < 0:
            raise ConfigError("sweep steps must be non-negative")
        if self.sweep_steps and self.b_end is None:
            raise ConfigError("a b-sweep needs b_end")
        if self.b_end is not None and not 0 < self.b_end <= self.b:
            raise ConfigError(f"b_end must lie in (0, {self.b}]")
        if self.field_nr < 1 or self.field_ntheta < 1:
            raise ConfigError("field grid sizes must be positive")
        try:
            get_problem(self.problem, **self.problem_params())
        except ValueError as err:
            raise ConfigError(str(err)) from None

    def problem_params(self) -> dict:
        return {"lambda": self.lam, "delta": self.delta, "bc": self.bc}

    @property
    def has_sweep(self) -> bool:
        return self.b_end is not None and self.sweep_steps > 0

    def discrete_problem(self, b: Optional[float] = None) -> DiscreteProblem:
        dom = EllipseDomain(self.a, self.b if b is None else b)
        return DiscreteProblem(dom, get_problem(self.problem, **self.problem_params()), self.M, self.N)

    def aobd_config(self) -> AOBDConfig:
        solver = TrustRegionConfig(
            eps_g=self.eps_g, eps_v=self.eps_v, ftol=self.ftol, max_iter=self.max_iter, hessian_mode=self.hessian_mode
        )
        base = AOBDConfig()
        return AOBDConfig(
            search=GridSearchSpec(self.search_lo, self.search_hi, self.search_points),
            solver=solver,
            polish_solver=TrustRegionConfig(
                eps_g=1e-30, eps_v=1e-30, ftol=self.ftol, max_iter=base.polish_solver.max_iter,
                hessian_mode=self.hessian_mode,
            ),
            record_tol=self.record_tol,
            max_basis=self.max_basis,
            starts_per_round=self.starts_per_round,
            max_rounds=self.max_rounds,
            inner_product=self.inner_product,
            seed_resolution=self.seed_resolution,
        )

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for section, key, attr in _LAYOUT:
            value = getattr(self, attr)
            if value is None:
                continue
            if not cp.has_section(section):
                cp.add_section(section)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            cp.set(section, key, str(value))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


def _convert(attr: str, raw: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = str(kinds[attr])
    raw = raw.strip()
    if attr == "seed_resolution":
        parts = [p for p in raw.replace("x", ",").split(",") if p.strip()]
        if len(parts) != 2:
            raise ValueError("expected two integers 'M,N'")
        return (int(parts[0]), int(parts[1]))
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw.lower() if attr in ("bc", "hessian_mode", "inner_product", "problem") else raw


def load_config(text: str, **overrides) -> RunConfig:
    """Parse ini text; unknown keys and bad values raise ConfigError naming the field."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse configuration: {err}") from None
    known = {(s, k): a for s, k, a in _LAYOUT}
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            attr = known.get((section, key))
            if attr is None:
                raise ConfigError(f"unknown setting [{section}] {key}")
            try:
                values[attr] = _convert(attr, raw)
            except ValueError as err:
                raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {err}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


@dataclass
class ResultBundle:
    config: RunConfig
    records: List[SolutionRecord]
    paths: List[ContinuationPath] = field(default_factory=list)
    step_one_trace: str = ""
    directory: Optional[str] = None


# ------------------------------------------------------------------ records
def write_record(path: str, rec: SolutionRecord, M: int, N: int, digest: str = ""):
    lines = [
        "# multisol record",
        f"# M = {M}",
        f"# N = {N}",
        f"# config_sha256 = {digest}",
        f"# residual_inf = {rec.residual_inf!r}",
        f"# J = {rec.J!r}",
        f"# iterations = {rec.iterations}",
        f"# origin = {rec.origin}",
        "# amplitudes = " + " ".join(f"{a:.17g}" for a in rec.amplitudes),
    ]
    lines += [f"{v:.17g}" for v in rec.xi]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_record(path: str):
    """Returns ``(record, M, N)``."""
    header, values = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    k, v = line[1:].split("=", 1)
                    header[k.strip()] = v.strip()
                continue
            values.append(float(line))
    M, N = int(header["M"]), int(header["N"])
    xi = np.array(values)
    if xi.size != n_dofs(M, N):
        raise ValueError(f"{path}: expected {n_dofs(M, N)} coefficients, found {xi.size}")
    amps = tuple(float(a) for a in header.get("amplitudes", "").split())
    rec = SolutionRecord(
        xi=xi,
        residual_inf=float(header["residual_inf"]),
        J=float(header["J"]),
        amplitudes=amps,
        iterations=int(header.get("iterations", 0)),
        origin=header.get("origin", ""),
    )
    return rec, M, N


# ------------------------------------------------------------------ exports
def _field_rows(dp: DiscreteProblem, xi, nr: int, ntheta: int):
    r = np.linspace(0.0, 1.0, nr) if nr > 1 else np.array([0.0])
    th = 2 * np.pi * np.arange(ntheta) / ntheta
    R, TH = np.meshgrid(r, th, indexing="ij")
    R, TH = R.ravel(), TH.ravel()
    u = dp.evaluate(xi, R, TH)
    x, y = map_to_cartesian(dp.domain, R, TH)
    return np.column_stack([R, TH, np.atleast_1d(x), np.atleast_1d(y), u])


def export_field(dp: DiscreteProblem, rec: SolutionRecord, path: str, nr: int = 11, ntheta: int = 32, digest: str = ""):
    """Write rows ``r,theta,x,y,u`` on a tensor grid; the header carries hash, residual and J."""
    rows = _field_rows(dp, rec.xi, nr, ntheta)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256 = {digest}\n")
        fh.write(f"# residual_inf = {rec.residual_inf!r}\n")
        fh.write(f"# J = {rec.J!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "theta", "x", "y", "u"])
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])
    return path


def _reference(paths: List[ContinuationPath], ref: Optional[int]):
    if ref is not None:
        return next((p for p in paths if p.record_id == ref), None)
    nonzero = [p for p in paths if p.J and p.J[0] != 0]
    return min(nonzero, key=lambda p: abs(p.J[0])) if nonzero else None


def export_energy_curves(paths: List[ContinuationPath], path: str, reference: Optional[int] = None):
    """Rows ``record_id,b,J,J_over_Jref``, J_ref taken at the same b.

    The reference defaults to the record of smallest |J| at the start of the
    sweep.  Without a usable reference the ratio column is omitted.
    """
    ref = _reference(paths, reference)
    if ref is None:
        warnings.warn("no reference record for relative energies; column omitted", RuntimeWarning)
    ref_J = dict(zip(ref.b, ref.J)) if ref is not None else {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_id", "b", "J"] + (["J_over_Jref"] if ref is not None else []))
        for p in paths:
            for b, J in zip(p.b, p.J):
                row = [p.record_id, f"{b:.17g}", f"{J:.17g}"]
                if ref is not None:
                    row.append(f"{J / ref_J[b]:.17g}" if ref_J.get(b) else "")
                w.writerow(row)
    return path


def _write_paths(directory: str, paths: List[ContinuationPath], reference):
    cdir = os.path.join(directory, "continuation")
    os.makedirs(cdir, exist_ok=True)
    for p in paths:
        with open(os.path.join(cdir, f"path_{p.record_id:03d}.csv"), "w", newline="") as fh:
            fh.write(f"# truncated = {int(p.truncated)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["b", "J", "residual_inf"])
            for b, J, r in zip(p.b, p.J, p.residual):
                w.writerow([f"{b:.17g}", f"{J:.17g}", f"{r:.17g}"])
    export_energy_curves(paths, os.path.join(directory, "energy.csv"), reference)


def load_paths(directory: str) -> List[ContinuationPath]:
    """Continuation paths stored in a bundle (without coefficient payloads)."""
    cdir = os.path.join(directory, "continuation")
    if not os.path.isdir(cdir):
        return []
    paths = []
    for name in sorted(os.listdir(cdir)):
        if not (name.startswith("path_") and name.endswith(".csv")):
            continue
        p = ContinuationPath(int(name[5:8]))
        with open(os.path.join(cdir, name)) as fh:
            first = fh.readline()
            p.truncated = first.strip().endswith("1")
            for row in csv.DictReader(fh):
                p.b.append(float(row["b"]))
                p.J.append(float(row["J"]))
                p.residual.append(float(row["residual_inf"]))
        paths.append(p)
    return paths


def write_bundle(bundle: ResultBundle, directory: str) -> str:
    cfg = bundle.config
    digest = cfg.digest()
    os.makedirs(os.path.join(directory, "records"), exist_ok=True)
    os.makedirs(os.path.join(directory, "fields"), exist_ok=True)
    os.makedirs(os.path.join(directory, "traces"), exist_ok=True)
    with open(os.path.join(directory, "config.ini"), "w") as fh:
        fh.write(cfg.to_ini())
    dp = cfg.discrete_problem()
    with open(os.path.join(directory, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_id", "J", "residual_inf", "iterations", "origin", "coef_norm"])
        for i, rec in enumerate(bundle.records):
            w.writerow([i, f"{rec.J:.17g}", f"{rec.residual_inf:.17g}", rec.iterations, rec.origin, f"{rec.norm:.17g}"])
            write_record(os.path.join(directory, "records", f"rec_{i:03d}.txt"), rec, cfg.M, cfg.N, digest)
            export_field(dp, rec, os.path.join(directory, "fields", f"rec_{i:03d}.csv"), cfg.field_nr, cfg.field_ntheta, digest)
    with open(os.path.join(directory, "traces", "step_one.csv"), "w") as fh:
        fh.write(bundle.step_one_trace)
    if bundle.paths:
        _write_paths(directory, bundle.paths, cfg.reference)
    bundle.directory = directory
    return directory


def run(cfg: RunConfig, directory: Optional[str] = None) -> ResultBundle:
    """Seed, enrich and refine; continue in b when the config has a sweep; write the bundle."""
    if cfg.seed is None:
        raise ConfigError("a run needs an explicit RNG seed")
    dp = cfg.discrete_problem()
    rng = np.random.default_rng(cfg.seed)
    result = solve_multiple(dp, rng, cfg.aobd_config())
    trace = result.step_one.trace_csv() if result.step_one is not None else ""
    bundle = ResultBundle(cfg, result.records, step_one_trace=trace)
    if cfg.has_sweep and result.records:
        bundle.paths = continue_in_geometry(dp, result.records, cfg.b_end, cfg.sweep_steps, cfg.aobd_config())
    write_bundle(bundle, directory or cfg.output)
    return bundle


def load_bundle(directory: str) -> ResultBundle:
    with open(os.path.join(directory, "config.ini")) as fh:
        cfg = load_config(fh.read())
    rdir = os.path.join(directory, "records")
    records = []
    for name in sorted(os.listdir(rdir)):
        if name.endswith(".txt"):
            rec, M, N = read_record(os.path.join(rdir, name))
            if (M, N) != (cfg.M, cfg.N):
                raise ValueError(f"{name}: resolution {M}x{N} does not match the configuration")
            records.append(rec)
    return ResultBundle(cfg, records, directory=directory)


def sweep_bundle(directory: str, b_end: float, steps: int, reference: Optional[int] = None) -> List[ContinuationPath]:
    """Continue the records of an existing bundle in b and add the energy tables."""
    bundle = load_bundle(directory)
    cfg = bundle.config
    if not 0 < b_end <= cfg.b:
        raise ConfigError(f"b_end must lie in (0, {cfg.b}]")
    paths = continue_in_geometry(cfg.discrete_problem(), bundle.records, b_end, steps, cfg.aobd_config())
    _write_paths(directory, paths, reference if reference is not None else cfg.reference)
    return paths


@dataclass
class ValidationReport:
    checked: int = 0
    failures: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate(directory: str, floor: float = 1e-12) -> ValidationReport:
    """Recompute |F|_inf of every record; it must stay within 10x of the stored value."""
    bundle = load_bundle(directory)
    dp = bundle.config.discrete_problem()
    report = ValidationReport()
    for i, rec in enumerate(bundle.records):
        r = float(np.max(np.abs(dp.residual(rec.xi))))
        report.checked += 1
        if not (np.isfinite(r) and r <= 10.0 * max(rec.residual_inf, floor)):
            report.failures.append((i, rec.residual_inf, r))
    return report
