"""Command-line frontend: ``mho region``, ``mho verify``, ``mho dc``.

Exit codes: 0 success, 1 verification failure, 2 spec error, 3 unsupported
configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .oracle import (
    CascadeSpec,
    TestChannelBank,
    corollary3_rates,
    joint_entropy_of_sources,
    phi_oracle,
    source_pmf,
    wz_envelope_oracle,
)
from .regions import (
    DEFAULT_GRID_STEP,
    Mode,
    ProblemSpec,
    build_inner,
    max_sources,
    outer_region,
    probe_grid,
    region_gap,
    slepian_wolf_reduction,
    weak_region,
    InnerRegion,
)
from .single_letter import phi, solve_critical_distortion, wz_curve, wz_rate

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_SPEC_ERROR = 2
EXIT_UNSUPPORTED = 3

SCHEMA_VERSION = "1"
SIG_DIGITS = 12
DEFAULT_TOL = 1e-6
N3_PROBE_STEP = 0.01
DEFAULT_TOLERANCES = {"formula": 1e-10, "region": DEFAULT_TOL, "gap": 1e-3, "envelope": 1e-6}


class SpecError(ValueError):
    """Spec document rejected; message names the offending field."""


class UnsupportedConfig(ValueError):
    pass


def fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def rounded(x: float) -> float | None:
    """JSON-ready value at the export precision; infeasible entries become null."""
    if not math.isfinite(x):
        return None
    return float(fmt(x))


@dataclass(frozen=True)
class SpecDocument:
    schema_version: str
    n: int
    p: tuple[float, ...]
    mode: str
    D: tuple[float, ...] | None = None
    grid_step: float = DEFAULT_GRID_STEP
    tolerances: dict[str, float] = field(default_factory=dict)

    FIELDS = ("schema_version", "n", "p", "D", "mode", "grid_step", "tolerances")
    REQUIRED = ("schema_version", "n", "p", "mode")

    @classmethod
    def from_dict(cls, raw: Any) -> "SpecDocument":
        if not isinstance(raw, dict):
            raise SpecError("spec must be a JSON object")
        unknown = sorted(set(raw) - set(cls.FIELDS))
        if unknown:
            raise SpecError(f"unknown field(s) {unknown}")
        for name in cls.REQUIRED:
            if name not in raw:
                raise SpecError(f"field '{name}': missing")
        if raw["schema_version"] != SCHEMA_VERSION:
            raise SpecError(f"field 'schema_version': expected {SCHEMA_VERSION!r}, got {raw['schema_version']!r}")
        n = raw["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise SpecError(f"field 'n': must be an integer >= 2, got {n!r}")
        p = _real_list(raw["p"], "p")
        if len(p) != n - 1:
            raise SpecError(f"field 'p': expected {n - 1} helper crossovers for n={n}, got {len(p)}")
        mode = raw["mode"]
        if mode not in ("strong", "weak"):
            raise SpecError(f"field 'mode': must be 'strong' or 'weak', got {mode!r}")
        D = raw.get("D")
        if D is not None:
            D = _real_list(D, "D")
            if len(D) != n - 1:
                raise SpecError(f"field 'D': expected {n - 1} caps, got {len(D)}")
        if mode == "strong" and D is None:
            raise SpecError("field 'D': required in strong mode")
        if mode == "weak" and D is not None:
            raise SpecError("field 'D': not allowed in weak mode")
        step = raw.get("grid_step", DEFAULT_GRID_STEP)
        if not _is_real(step) or not step > 0:
            raise SpecError(f"field 'grid_step': must be a positive number, got {step!r}")
        tols = raw.get("tolerances", {}) or {}
        if not isinstance(tols, dict):
            raise SpecError("field 'tolerances': must be an object")
        for k, v in tols.items():
            if k not in DEFAULT_TOLERANCES:
                raise SpecError(f"field 'tolerances': unknown key {k!r}")
            if not _is_real(v) or not v > 0:
                raise SpecError(f"field 'tolerances.{k}': must be a positive number")
        return cls(SCHEMA_VERSION, n, p, mode, D, float(step), {k: float(v) for k, v in tols.items()})

    @classmethod
    def load(cls, path: str | Path) -> "SpecDocument":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise SpecError(f"cannot read spec {path}: {exc.strerror}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def problem(self) -> ProblemSpec:
        if self.n > max_sources():
            raise UnsupportedConfig(f"n={self.n} exceeds the source cap of {max_sources()} (MHO_MAX_N)")
        try:
            return ProblemSpec(self.p, self.D, Mode(self.mode))
        except ValueError as exc:
            raise SpecError(str(exc)) from None

    def tolerance(self, key: str) -> float:
        return self.tolerances.get(key, DEFAULT_TOLERANCES[key])

    def echo(self) -> dict:
        out = {"schema_version": self.schema_version, "n": self.n, "p": list(self.p), "mode": self.mode}
        if self.D is not None:
            out["D"] = list(self.D)
        out["grid_step"] = self.grid_step
        if self.tolerances:
            out["tolerances"] = dict(sorted(self.tolerances.items()))
        return out


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _real_list(value, name: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise SpecError(f"field '{name}': must be a non-empty list of numbers")
    for k, x in enumerate(value):
        if not _is_real(x):
            raise SpecError(f"field '{name}[{k}]': not a finite number: {x!r}")
    return tuple(float(x) for x in value)


@dataclass
class RegionExport:
    metadata: dict
    columns: list[str]
    rows: list[list[float]]
    vertex_columns: list[str] = field(default_factory=list)
    vertex_rows: list[list[Any]] = field(default_factory=list)

    def boundary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(x) for x in row])
        return buf.getvalue()

    def vertices_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.vertex_columns)
        for row in self.vertex_rows:
            w.writerow([fmt(x) if isinstance(x, float) else x for x in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": [[rounded(x) for x in row] for row in self.rows],
        }
        if self.vertex_columns:
            doc["vertex_columns"] = self.vertex_columns
            doc["vertices"] = [
                [rounded(x) if isinstance(x, float) else x for x in row] for row in self.vertex_rows
            ]
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _vertex_table(region: InnerRegion) -> tuple[list[str], list[list[Any]]]:
    n = region.n_sources
    cols = [f"R{i}" for i in range(1, n + 1)] + ["Qc", "d_values", "strategies"]
    rows = []
    for v in region.vertices:
        qc = " ".join(str(i) for i in sorted(v.q_complement))
        ds = " ".join(f"{i}:{fmt(d)}" for i, d in sorted(v.d_values.items()))
        st = " ".join(f"{i}:{s.value}" for i, s in sorted(v.strategies.items()))
        rows.append([*[float(r) for r in v.rates], qc, ds, st])
    rows.sort(key=lambda r: tuple(r[1:n]) + (r[0],))
    return cols, rows


def build_export(doc: SpecDocument, bound: str, grid_step: float | None, probe_step: float | None) -> RegionExport:
    spec = doc.problem()
    n = spec.n_sources
    if n > 3:
        raise UnsupportedConfig(f"boundary export supports n in {{2, 3}}, got n={n}")
    if bound == "weak" and spec.mode is not Mode.WEAK:
        raise SpecError("--bound weak needs a weak-mode spec")
    if bound != "weak" and spec.mode is Mode.WEAK:
        raise SpecError(f"--bound {bound} needs a strong-mode spec")
    step = doc.grid_step if grid_step is None else grid_step
    if not step > 0:
        raise SpecError("--grid-step must be positive")
    if probe_step is None:
        probe_step = step if n == 2 else max(step, N3_PROBE_STEP)
    if not probe_step > 0:
        raise SpecError("--probe-step must be positive")
    probes = probe_grid(n - 1, probe_step)
    helper_cols = [f"R{i}" for i in range(2, n + 1)]

    regions = []
    inner = None
    if bound == "weak":
        regions.append(("min_R1", weak_region(spec)))
    else:
        if bound in ("inner", "both"):
            inner = build_inner(spec, step)
            regions.append(("min_R1_inner", inner))
        if bound in ("outer", "both"):
            regions.append(("min_R1_outer", outer_region(spec, step)))
    values = [r.min_primary_rate(probes) for _, r in regions]
    rows = [[*map(float, pt), *(float(v[k]) for v in values)] for k, pt in enumerate(probes)]

    meta = {
        "tool": "manyhelpone",
        "version": __version__,
        "command": "region",
        "spec": doc.echo(),
        "bound": bound,
        "grid_step": step,
        "probe_step": probe_step,
        "probe_count": len(rows),
    }
    export = RegionExport(meta, helper_cols + [name for name, _ in regions], rows)
    if inner is not None:
        export.vertex_columns, export.vertex_rows = _vertex_table(inner)
    return export


def write_export(export: RegionExport, fmt_name: str, output: str | None) -> list[Path]:
    written = []
    if fmt_name == "json":
        text = export.to_json()
        if output:
            Path(output).write_text(text)
            written.append(Path(output))
        else:
            sys.stdout.write(text)
        return written
    text = export.boundary_csv()
    if output:
        out = Path(output)
        out.write_text(text)
        written.append(out)
        if export.vertex_columns:
            vpath = out.with_name(out.stem + ".vertices.csv")
            vpath.write_text(export.vertices_csv())
            written.append(vpath)
    else:
        sys.stdout.write(text)
        if export.vertex_columns:
            sys.stdout.write("\n" + export.vertices_csv())
    return written


@dataclass
class CheckResult:
    name: str
    status: str  # PASS, FAIL, EXPECTED, KNOWN
    residual: float
    threshold: float
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"


def _check(name: str, residual: float, threshold: float, detail: str = "") -> CheckResult:
    ok = residual <= threshold
    return CheckResult(name, "PASS" if ok else "FAIL", residual, threshold, detail)


def formula_suite(doc: SpecDocument) -> list[CheckResult]:
    tol_f = doc.tolerance("formula")
    tol_env = doc.tolerance("envelope")
    grid = (0.0, 0.1, 0.2, 0.35, 0.5)
    out = []
    for k, p in enumerate(doc.p, start=2):
        worst, where = 0.0, None
        for d in grid:
            r = abs(phi([(p, d)]) - phi_oracle(CascadeSpec(((p, d),))))
            if r > worst:
                worst, where = r, d
        out.append(_check(f"phi_vs_oracle[p{k}]", worst, tol_f, f"d={where}" if where is not None else ""))
    if len(doc.p) >= 2:
        worst, where = 0.0, None
        for d in grid:
            pairs = tuple((p, d) for p in doc.p[:4])
            r = abs(phi(pairs) - phi_oracle(CascadeSpec(pairs)))
            if r > worst:
                worst, where = r, d
        out.append(_check("phi_vs_oracle[joint]", worst, tol_f, f"d={where}" if where is not None else ""))
    for k, p in enumerate(doc.p, start=2):
        if p <= 0:
            continue
        D, env = wz_envelope_oracle(p, 10_000)
        r = float(np.max(np.abs(np.array([wz_rate(p, x) for x in D]) - env)))
        out.append(_check(f"wz_vs_envelope[p{k}]", r, tol_env))
        c = solve_critical_distortion(p)
        out.append(_check(f"dc_residual[p{k}]", c.residual, tol_f, f"Dc={fmt(c.value)}"))
    # general inner-bound expressions on the cascade vs their binary assembly
    pmf = source_pmf(doc.p[:4])
    bank = TestChannelBank({i: 0.1 for i in range(2, len(doc.p[:4]) + 2)})
    worst = 0.0
    for mask in range(1, 2 ** (len(doc.p[:4]) + 1)):
        S = {i + 1 for i in range(len(doc.p[:4]) + 1) if mask >> i & 1}
        lhs = corollary3_rates(pmf, bank, S)
        mi = sum(wz_curve(doc.p[i - 2], 0.1) for i in S - {1})
        rhs = mi + (phi([(doc.p[i - 2], 0.1) for i in bank.channels if i not in S]) if 1 in S else 0.0)
        worst = max(worst, abs(lhs - rhs))
    out.append(_check("corollary3_assembly", worst, tol_f, "d=0.1"))
    return out


def region_suite(doc: SpecDocument, tol: float | None = None, samples: int = 10_000) -> list[CheckResult]:
    spec = doc.problem()
    n = spec.n_sources
    tol_r = doc.tolerance("region") if tol is None else tol
    tol_gap = doc.tolerance("gap")
    out = []
    rng = np.random.default_rng(0)
    if spec.mode is Mode.WEAK:
        weak = weak_region(spec)
        outer = outer_region(ProblemSpec(spec.crossovers, spec.crossovers))
        probes = probe_grid(n - 1, 0.01 if n == 2 else 0.05)
        a, b = weak.min_primary_rate(probes), outer.min_primary_rate(probes)
        out.append(_check("weak_equals_outer_at_D=p", float(np.max(np.abs(a - b))), tol_r))
        return out
    if n > 3:
        step = max(doc.grid_step, 0.05)
    else:
        step = doc.grid_step
    inner = build_inner(spec, step)
    outer = outer_region(spec, step)
    pts = rng.uniform(0.0, 1.2, size=(samples, n))
    violations = int(np.sum(inner.contains(pts) & ~outer.contains(pts, tol=tol_r)))
    out.append(_check("inner_subset_outer", float(violations), 0.0, f"{samples} samples"))
    vtx = outer.min_primary_rate(inner.points[:, 1:]) - inner.points[:, 0]
    out.append(_check("vertices_outer_feasible", max(0.0, float(np.max(vtx))), tol_r, f"{len(inner.points)} vertices"))
    if n == 2:
        p2, D2 = spec.crossovers[0], spec.distortion_caps[0]
        probes = np.linspace(wz_rate(p2, D2), 1.0, 2001)[:, None]
        rep = region_gap(inner, outer, probes)
        dc = solve_critical_distortion(p2).value
        if D2 <= dc:
            out.append(_check("gap_tight_case", rep.max_gap, tol_gap, f"at R2={fmt(rep.location[0])}"))
        else:
            status = "EXPECTED" if rep.max_gap > tol_gap else "PASS"
            out.append(CheckResult("gap_above_critical", status, rep.max_gap, tol_gap, f"at R2={fmt(rep.location[0])}"))
    if all(D == 0.0 for D in spec.distortion_caps) and n <= 3:
        sw = slepian_wolf_reduction(spec, probe_step=0.02)
        joint = joint_entropy_of_sources(spec.crossovers)
        out.append(_check("sw_sum_rate_vs_joint_entropy", abs(sw.sum_rate - joint), doc.tolerance("formula")))
        res = _check("sw_inner_equals_outer", sw.gap, tol_r)
        if res.failed and n >= 3:
            # helper-to-helper binning corners are not inner vertices
            res = CheckResult(res.name, "KNOWN", res.residual, res.threshold, "inner hull misses binning corners for n>=3")
        out.append(res)
    return out


def print_report(results: Sequence[CheckResult], stream=None) -> None:
    stream = stream or sys.stdout
    width = max(len(r.name) for r in results) if results else 10
    stream.write(f"{'check':<{width}}  status    residual      threshold     detail\n")
    for r in results:
        stream.write(f"{r.name:<{width}}  {r.status:<8}  {r.residual:<12.4g}  {r.threshold:<12.4g}  {r.detail}\n")


def cmd_region(args) -> int:
    doc = SpecDocument.load(args.spec)
    bound = args.bound or ("weak" if doc.mode == "weak" else "both")
    export = build_export(doc, bound, args.grid_step, args.probe_step)
    write_export(export, args.format, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = SpecDocument.load(args.spec)
    doc.problem()
    results = []
    if args.suite in ("formulas", "all"):
        results += formula_suite(doc)
    if args.suite in ("regions", "all"):
        results += region_suite(doc, args.tol)
    print_report(results)
    return EXIT_VERIFY_FAILED if any(r.failed for r in results) else EXIT_OK


def cmd_dc(args) -> int:
    p = args.p
    if not (0.0 < p <= 0.5) or math.isnan(p):
        raise SpecError(f"--p must lie in (0, 0.5], got {p}")
    c = solve_critical_distortion(p)
    if args.format == "json":
        sys.stdout.write(json.dumps({"p": p, "Dc": c.value, "residual": c.residual}) + "\n")
    else:
        sys.stdout.write(f"p={p!r} Dc={fmt(c.value)} residual={c.residual:.3e}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mho", description="Many-help-one binary rate regions.")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("region", help="export boundary samples and inner-hull vertices")
    r.add_argument("spec", help="JSON spec document")
    r.add_argument("--bound", choices=["inner", "outer", "weak", "both"], default=None)
    r.add_argument("--grid-step", type=float, default=None, help="d-grid step (default: spec grid_step or 1e-3)")
    r.add_argument("--probe-step", type=float, default=None, help="helper-rate probe step (default: grid step for n=2, 0.01 for n=3)")
    r.add_argument("--output", default=None, help="output path; CSV vertices go to <stem>.vertices.csv")
    r.add_argument("--format", choices=["csv", "json"], default="csv")
    r.set_defaults(func=cmd_region)

    v = sub.add_parser("verify", help="run oracle and region invariant suites")
    v.add_argument("spec")
    v.add_argument("--suite", choices=["formulas", "regions", "all"], default="all")
    v.add_argument("--tol", type=float, default=None, help=f"region tolerance (default: spec tolerances.region, else {DEFAULT_TOL})")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("dc", help="critical distortion of the joint-decoding rate")
    d.add_argument("--p", type=float, required=True)
    d.add_argument("--format", choices=["text", "json"], default="text")
    d.set_defaults(func=cmd_dc)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return EXIT_SPEC_ERROR
    except UnsupportedConfig as exc:
        sys.stderr.write(f"unsupported: {exc}\n")
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
