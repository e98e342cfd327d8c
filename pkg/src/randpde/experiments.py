"""Experiment runner: plain-text configs in, reproducible archives out.

A run archive is a directory with the fully-defaulted config snapshot, one
CSV per result family, derived SVG plots, and a manifest carrying content
hashes; re-running an archived config reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .defects import defect_coefficients, sign_canonical_offsets
from .errors import ConfigError, RandpdeError
from .estimators import (antithetic_estimate, compare_strategies,
                         control_variate_estimate, mc_estimate, sqs_estimate,
                         write_reports_csv)
from .fields import Checkerboard, PerturbedPeriodic
from .msfem import CoarseMesh, baseline_solve, build_cr_space, compute_errors, msfem_solve
from .perforations import build_perforations
from .poisson import reference_solve
from .sqs import sqs_auxiliary
from .svgplot import svg_heatmap, svg_line_plot

KINDS = ("homogenize", "vr-compare", "msfem", "msfem-robustness")
STRATEGIES = ("mc", "antithetic", "cv1", "cv2", "sqs1", "sqs2")
MSFEM_METHODS = ("cr", "linear", "q1")

RHS_FUNCTIONS = {
    "one": lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
    "sinq": lambda x, y: np.sin(np.pi * np.asarray(x) / 2) * np.sin(np.pi * np.asarray(y) / 2),
}

_SCHEMA = {
    "experiment": {"kind", "seed", "out", "strict", "threads"},
    "law": {"kind", "alpha", "beta", "a_per", "c_per", "eta"},
    "estimate": {"n", "r", "m", "strategies", "pool", "solver"},
    "geometry": {"kind", "epsilon", "radius_factor", "count", "width_range",
                 "height_range", "gseed"},
    "msfem": {"h", "fine_n", "methods", "with_bubbles", "reference_n", "f", "kappa"},
}


def _parse_number(token: str, key: str) -> float:
    token = token.strip()
    try:
        if "/" in token:
            num, den = token.split("/")
            return float(num) / float(den)
        return float(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"key {key!r}: cannot parse number {token!r}") from exc


def _parse_list(raw: str, key: str, conv):
    return [conv(tok, key) for tok in raw.split(",") if tok.strip()]


def _parse_int(token: str, key: str) -> int:
    value = _parse_number(token, key)
    if value != int(value):
        raise ConfigError(f"key {key!r}: expected integer, got {token!r}")
    return int(value)


def _parse_bool(token: str, key: str) -> bool:
    t = token.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected boolean, got {token!r}")


def _parse_matrix(raw: str, key: str) -> np.ndarray:
    vals = _parse_list(raw, key, _parse_number)
    if len(vals) == 1:
        return vals[0] * np.eye(2)
    if len(vals) == 4:
        return np.array(vals).reshape(2, 2)
    raise ConfigError(f"key {key!r}: expected 1 or 4 numbers, got {len(vals)}")


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the fully-defaulted snapshot."""

    kind: str
    seed: int
    out: str
    strict: bool
    threads: int
    law: dict = field(default_factory=dict)
    estimate: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    msfem: dict = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {
            "experiment": {"kind": self.kind, "seed": self.seed, "out": self.out,
                           "strict": self.strict, "threads": self.threads},
            "law": dict(self.law), "estimate": dict(self.estimate),
            "geometry": dict(self.geometry), "msfem": dict(self.msfem),
        }


def parse_config(path) -> ExperimentConfig:
    """Parse and statically validate the plain-text configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    exp = parser["experiment"]
    kind = exp.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError(f"experiment.kind must be one of {KINDS}, got {kind!r}")
    cfg = ExperimentConfig(
        kind=kind,
        seed=_parse_int(exp.get("seed", "0"), "experiment.seed"),
        out=exp.get("out", "runs/out").strip(),
        strict=_parse_bool(exp.get("strict", "false"), "experiment.strict"),
        threads=_parse_int(exp.get("threads", "1"), "experiment.threads"),
    )

    if kind in ("homogenize", "vr-compare"):
        if "law" not in parser:
            raise ConfigError(f"{kind} needs a [law] section")
        law = parser["law"]
        lkind = law.get("kind", "").strip()
        if lkind == "checkerboard":
            cfg.law = {"kind": lkind,
                       "alpha": _parse_number(law.get("alpha", "3"), "law.alpha"),
                       "beta": _parse_number(law.get("beta", "20"), "law.beta")}
        elif lkind == "perturbed_periodic":
            cfg.law = {"kind": lkind,
                       "a_per": _parse_matrix(law.get("a_per", "3"), "law.a_per").tolist(),
                       "c_per": _parse_matrix(law.get("c_per", "17"), "law.c_per").tolist(),
                       "eta": _parse_number(law.get("eta", "0.5"), "law.eta")}
        else:
            raise ConfigError(f"law.kind must be checkerboard or perturbed_periodic, got {lkind!r}")
        est = parser["estimate"] if "estimate" in parser else {}
        strategies = [s.strip() for s in est.get("strategies", "mc").split(",") if s.strip()]
        if kind == "homogenize":
            strategies = ["mc"]
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"estimate.strategies: unknown strategy {s!r}")
        if kind == "vr-compare" and "mc" not in strategies:
            raise ConfigError("vr-compare needs the mc baseline in estimate.strategies")
        cfg.estimate = {
            "n": _parse_list(est.get("n", "10"), "estimate.n", _parse_int),
            "r": _parse_int(est.get("r", "8"), "estimate.r"),
            "m": _parse_int(est.get("m", "100"), "estimate.m"),
            "strategies": strategies,
            "pool": _parse_int(est.get("pool", "2000"), "estimate.pool"),
            "solver": est.get("solver", "cg").strip(),
        }
        if cfg.estimate["solver"] not in ("cg", "direct"):
            raise ConfigError(f"estimate.solver must be cg or direct")
        if "estimate" in parser and any(v < 1 for v in cfg.estimate["n"]):
            raise ConfigError("estimate.n entries must be >= 1")
    else:
        if "geometry" not in parser:
            raise ConfigError(f"{kind} needs a [geometry] section")
        geo = parser["geometry"]
        gkind = geo.get("kind", "").strip()
        cfg.geometry = {"kind": gkind,
                        "epsilon": _parse_number(geo.get("epsilon", "0.1"), "geometry.epsilon"),
                        "radius_factor": _parse_number(geo.get("radius_factor", "0.2"),
                                                       "geometry.radius_factor"),
                        "count": _parse_int(geo.get("count", "100"), "geometry.count"),
                        "width_range": _parse_list(geo.get("width_range", "0.02,0.05"),
                                                   "geometry.width_range", _parse_number),
                        "height_range": _parse_list(geo.get("height_range", "0.02,0.05"),
                                                    "geometry.height_range", _parse_number),
                        "gseed": _parse_int(geo.get("gseed", "0"), "geometry.gseed")}
        allowed = ("none", "periodic_discs", "shifted_periodic_discs", "random_rectangles")
        if gkind not in allowed:
            raise ConfigError(f"geometry.kind must be one of {allowed}, got {gkind!r}")
        if kind == "msfem-robustness" and gkind not in ("periodic_discs",
                                                        "shifted_periodic_discs"):
            raise ConfigError("msfem-robustness is defined for periodic disc geometries")
        ms = parser["msfem"] if "msfem" in parser else {}
        h_list = _parse_list(ms.get("h", "0.2"), "msfem.h", _parse_number)
        methods = [s.strip() for s in ms.get("methods", "cr").split(",") if s.strip()]
        for meth in methods:
            if meth not in MSFEM_METHODS:
                raise ConfigError(f"msfem.methods: unknown method {meth!r}")
        fine_raw = ms.get("fine_n", "32")
        fine_list = _parse_list(fine_raw, "msfem.fine_n", _parse_int)
        if len(fine_list) == 1:
            fine_list = fine_list * len(h_list)
        if len(fine_list) != len(h_list):
            raise ConfigError("msfem.fine_n must be scalar or match msfem.h in length")
        f_name = ms.get("f", "one").strip()
        if f_name not in RHS_FUNCTIONS:
            raise ConfigError(f"msfem.f must be one of {tuple(RHS_FUNCTIONS)}, got {f_name!r}")
        cfg.msfem = {
            "h": h_list,
            "fine_n": fine_list,
            "methods": methods,
            "with_bubbles": _parse_bool(ms.get("with_bubbles", "true"), "msfem.with_bubbles"),
            "reference_n": _parse_int(ms.get("reference_n", "0"), "msfem.reference_n"),
            "f": f_name,
            "kappa": _parse_number(ms.get("kappa", "0"), "msfem.kappa"),
        }
        for hval in h_list:
            m = 1.0 / hval
            if abs(m - round(m)) > 1e-9 or round(m) < 2:
                raise ConfigError(f"msfem.h entry {hval} must equal 1/m for integer m >= 2")
    return cfg


def _build_law(cfg: ExperimentConfig):
    if cfg.law["kind"] == "checkerboard":
        return Checkerboard(cfg.law["alpha"], cfg.law["beta"])
    return PerturbedPeriodic(a_per=np.array(cfg.law["a_per"]),
                             c_per=np.array(cfg.law["c_per"]), eta=cfg.law["eta"])


def _build_perf(cfg: ExperimentConfig):
    g = cfg.geometry
    return build_perforations(g["kind"], epsilon=g["epsilon"],
                              radius_factor=g["radius_factor"], count=g["count"],
                              width_range=tuple(g["width_range"]),
                              height_range=tuple(g["height_range"]), seed=g["gseed"])


def _msfem_grids(cfg: ExperimentConfig):
    """(m, fine_n) pairs plus the reference resolution (validated divisible)."""
    pairs = [(int(round(1.0 / h)), fn) for h, fn in zip(cfg.msfem["h"], cfg.msfem["fine_n"])]
    ref_n = cfg.msfem["reference_n"]
    if ref_n == 0:
        ref_n = 2 * max(m * fn for m, fn in pairs)
    for m, fn in pairs:
        if ref_n % (m * fn) != 0:
            raise ConfigError(
                f"msfem.reference_n={ref_n} is not divisible by m*fine_n={m * fn} "
                f"(H=1/{m}); choose a compatible reference resolution")
    return pairs, ref_n


def validate(cfg: ExperimentConfig) -> dict:
    """Static validation and cost estimate; never solves anything."""
    problems: list[str] = []
    notes: list[str] = []
    solves = 0
    memory = 0
    try:
        if cfg.kind in ("homogenize", "vr-compare"):
            _build_law(cfg)
            est = cfg.estimate
            d = 2
            for n in est["n"]:
                dof = (n * est["r"]) ** 2
                memory = max(memory, 9 * dof * 16)
                for s in est["strategies"]:
                    if s == "antithetic":
                        solves += 2 * d * est["m"]
                    elif s in ("cv1", "cv2"):
                        pairs = len(sign_canonical_offsets(n, n / 2)) if s == "cv2" else 0
                        solves += d * est["m"] + 6 + d * pairs
                    elif s == "sqs2":
                        solves += d * est["m"] + 4
                    else:
                        solves += d * est["m"]
        else:
            perf = _build_perf(cfg)
            pairs, ref_n = _msfem_grids(cfg)
            memory = 9 * (ref_n + 1) ** 2 * 16
            geo_count = 2 if cfg.kind == "msfem-robustness" else 1
            solves += geo_count  # reference solves
            feature = perf.smallest_feature()
            for m, fn in pairs:
                h_loc = 1.0 / (m * fn)
                if np.isfinite(feature) and feature / h_loc < 4.0:
                    msg = (f"fine_n={fn} at H=1/{m} under-resolves {perf.describe()}: "
                           f"{feature / h_loc:.2f} < 4 cells across the smallest perforation")
                    (problems if cfg.strict else notes).append(msg)
                per_elem = 5 if cfg.msfem["with_bubbles"] else 4
                solves += geo_count * len(cfg.msfem["methods"]) * m * m * per_elem
    except RandpdeError as exc:
        problems.append(str(exc))
    return {"problems": problems, "notes": notes,
            "estimated_pde_solves": solves, "estimated_peak_bytes": int(memory)}


@dataclass
class RunArchive:
    out_dir: Path
    manifest: dict

    @property
    def status(self) -> str:
        return self.manifest.get("status", "unknown")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_estimators(cfg: ExperimentConfig, out: Path) -> tuple[list, list[str]]:
    law = _build_law(cfg)
    est = cfg.estimate
    warnings_log: list[str] = []
    reports = []

    def offline(n):
        """Defect catalog and selection integrals shared by the strategies."""
        extras = {}
        needs_cv = any(s in est["strategies"] for s in ("cv1", "cv2"))
        if needs_cv:
            if not isinstance(law, PerturbedPeriodic):
                raise ConfigError("control variates need law.kind = perturbed_periodic")
            order = 2 if "cv2" in est["strategies"] else 1
            extras["defects"] = defect_coefficients(law, n=n, r=est["r"], order=order,
                                                    method=est["solver"])
        if "sqs2" in est["strategies"]:
            a0, a1 = law.phase_matrices()
            c0 = a0 + law.bernoulli_p * (a1 - a0)
            extras["aux"] = sqs_auxiliary(c0, a1 - a0, n=n, r=est["r"],
                                          method=est["solver"])
        return extras

    def run_one(n, strategy, extras):
        kw = dict(tol=1e-9, method=est["solver"])
        if strategy == "mc":
            return mc_estimate(law, n, est["r"], est["m"], cfg.seed, **kw)
        if strategy == "antithetic":
            return antithetic_estimate(law, n, est["r"], est["m"], cfg.seed, **kw)
        if strategy in ("cv1", "cv2"):
            order = 1 if strategy == "cv1" else 2
            rep = control_variate_estimate(law, n, est["r"], est["m"], order,
                                           cfg.seed, extras["defects"], **kw)
            if rep.degenerate_control:
                warnings_log.append(f"degenerate control variate at n={n} ({strategy})")
            return rep
        if strategy == "sqs1":
            return sqs_estimate(law, n, est["r"], est["m"], cfg.seed, mode="exact1", **kw)
        return sqs_estimate(law, n, est["r"], est["m"], cfg.seed, mode="ranked2",
                            pool=est["pool"], aux=extras["aux"], **kw)

    for n in est["n"]:
        extras = offline(n)
        items = [(n, s) for s in est["strategies"]]
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                futures = [pool.submit(run_one, n, s, extras) for (n, s) in items]
                reports.extend(f.result() for f in futures)
        else:
            reports.extend(run_one(n, s, extras) for (n, s) in items)

    write_reports_csv(reports, out / "reports.csv")
    if len(est["strategies"]) > 1:
        rows = []
        for n in est["n"]:
            group = [r for r in reports if r.n == n]
            table = compare_strategies(group)
            for rec in table.rows:
                rows.append({"n": n, **rec})
        with open(out / "comparison.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["n", "strategy", "entry",
                                                    "factor_equal_cost", "factor_realized",
                                                    "bias", "bias_bound", "bias_within_bound"])
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                                 for k, v in row.items()})
    _plot_estimates(reports, est, out)
    return reports, warnings_log


def _plot_estimates(reports, est, out: Path) -> None:
    series = []
    for strategy in est["strategies"]:
        group = sorted((r for r in reports if r.strategy == strategy), key=lambda r: r.n)
        if not group:
            continue
        series.append({"label": strategy,
                       "x": [r.n for r in group],
                       "y": [r.entry("11") for r in group],
                       "ci": [r.entry("11", "ci95") for r in group]})
    svg_line_plot(series, out / "mean_ci.svg", title="Estimated tensor entry 11 vs box size",
                  xlabel="box size n", ylabel="estimate with 95% band")


MSFEM_CSV_COLUMNS = ["method", "H", "geometry", "with_bubbles", "l2_rel", "h1_rel",
                     "dof", "solves"]


def _solve_msfem_case(mesh, perf, f, method, with_bubbles, fine_n, kappa):
    if method == "cr":
        space = build_cr_space(mesh, perf, fine_n, kappa=kappa, with_bubbles=with_bubbles)
        return msfem_solve(space, f)
    name = {"linear": "msfem_linear", "q1": "coarse_q1"}[method]
    return baseline_solve(mesh, perf, f, name, with_bubbles=with_bubbles,
                          fine_n=fine_n, kappa=kappa)


def _run_msfem(cfg: ExperimentConfig, out: Path) -> tuple[list[dict], list[str]]:
    ms = cfg.msfem
    f = RHS_FUNCTIONS[ms["f"]]
    kappa = ms["kappa"] if ms["kappa"] > 0 else None
    pairs, ref_n = _msfem_grids(cfg)

    if cfg.kind == "msfem-robustness":
        g = cfg.geometry
        geometries = [("test1_unshifted", build_perforations(
                          "periodic_discs", epsilon=g["epsilon"],
                          radius_factor=g["radius_factor"])),
                      ("test2_shifted", build_perforations(
                          "shifted_periodic_discs", epsilon=g["epsilon"],
                          radius_factor=g["radius_factor"]))]
    else:
        perf = _build_perf(cfg)
        geometries = [(perf.describe(), perf)]

    rows: list[dict] = []
    notes: list[str] = []
    heat_done = False
    for geo_id, perf in geometries:
        ref = reference_solve(perf, f, ref_n, strict=cfg.strict)
        items = [(m, fn, method) for (m, fn) in pairs for method in ms["methods"]]

        def solve_item(item):
            m, fn, method = item
            u = _solve_msfem_case(CoarseMesh(m), perf, f, method,
                                  ms["with_bubbles"], fn, kappa)
            l2, h1 = compute_errors(u, ref)
            return {"method": method, "H": 1.0 / m, "geometry": geo_id,
                    "with_bubbles": ms["with_bubbles"], "l2_rel": l2, "h1_rel": h1,
                    "dof": u.dof, "solves": u.solves}, u

        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(solve_item, items))
        else:
            results = [solve_item(it) for it in items]
        rows.extend(row for row, _ in results)

        if not heat_done and results:
            _, u = results[0]
            fn = u.fine_n
            stitched = np.zeros((u.m * fn + 1, u.m * fn + 1))
            for i in range(u.m):
                for j in range(u.m):
                    stitched[i * fn:(i + 1) * fn + 1, j * fn:(j + 1) * fn + 1] = u.recon[i, j]
            svg_heatmap(stitched, out / "heatmap_solution.svg",
                        title=f"coarse solution ({results[0][0]['method']})")
            probe = np.linspace(0, 1, 257)
            svg_heatmap(perf.indicator(probe[:, None], probe[None, :]).astype(float),
                        out / "heatmap_perforations.svg", title="perforation indicator")
            heat_done = True

    with open(out / "msfem.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MSFEM_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                             for k, v in row.items()})
    _plot_msfem(rows, out)
    return rows, notes


def _plot_msfem(rows: list[dict], out: Path) -> None:
    for norm, fname in (("l2_rel", "errors_l2.svg"), ("h1_rel", "errors_h1.svg")):
        series = []
        keys = sorted({(r["method"], r["geometry"]) for r in rows})
        for method, geo in keys:
            group = sorted((r for r in rows
                            if r["method"] == method and r["geometry"] == geo),
                           key=lambda r: r["H"])
            label = method if len({g for _, g in keys}) == 1 else f"{method}:{geo}"
            series.append({"label": label,
                           "x": [r["H"] for r in group],
                           "y": [r[norm] for r in group]})
        svg_line_plot(series, out / fname, title=f"relative {norm.split('_')[0]} error vs H",
                      xlabel="H", ylabel="relative error", logx=True)


def run(cfg: ExperimentConfig, out_override=None, seed_override=None,
        threads_override=None) -> RunArchive:
    """Execute the experiment and write the archive; on solver failure the
    partial results are flushed and flagged in the manifest."""
    if seed_override is not None:
        cfg.seed = seed_override
    if threads_override is not None:
        cfg.threads = threads_override
    out = Path(out_override if out_override is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    diag = validate(cfg)
    if diag["problems"]:
        raise ConfigError("; ".join(diag["problems"]))

    manifest = {"config": cfg.snapshot(), "seed": cfg.seed, "version": __version__,
                "status": "ok", "warnings": list(diag["notes"]), "files": {},
                "estimated_pde_solves": diag["estimated_pde_solves"]}
    try:
        if cfg.kind in ("homogenize", "vr-compare"):
            _, warn = _run_estimators(cfg, out)
        else:
            _, warn = _run_msfem(cfg, out)
        manifest["warnings"].extend(warn)
    except RandpdeError as exc:
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["traceback"] = traceback.format_exc().splitlines()[-3:]

    with open(out / "config_snapshot.json", "w") as fh:
        json.dump(cfg.snapshot(), fh, indent=2, sort_keys=True)
    for p in sorted(out.iterdir()):
        if p.name != "manifest.json" and p.is_file():
            manifest["files"][p.name] = _sha256(p)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return RunArchive(out_dir=out, manifest=manifest)


def replot(archive_dir) -> list[str]:
    """Regenerate the SVG plots of an archive from its CSVs."""
    out = Path(archive_dir)
    made = []
    reports_csv = out / "reports.csv"
    msfem_csv = out / "msfem.csv"
    if reports_csv.exists():
        rows = list(csv.DictReader(open(reports_csv)))
        strategies = sorted({r["strategy"] for r in rows},
                            key=[r["strategy"] for r in rows].index)
        series = []
        for s in strategies:
            grp = sorted((r for r in rows if r["strategy"] == s and r["entry"] == "11"),
                         key=lambda r: int(r["n"]))
            series.append({"label": s, "x": [int(r["n"]) for r in grp],
                           "y": [float(r["mean"]) for r in grp],
                           "ci": [float(r["ci95"]) for r in grp]})
        svg_line_plot(series, out / "mean_ci.svg",
                      title="Estimated tensor entry 11 vs box size",
                      xlabel="box size n", ylabel="estimate with 95% band")
        made.append("mean_ci.svg")
    if msfem_csv.exists():
        rows = list(csv.DictReader(open(msfem_csv)))
        for row in rows:
            row["H"] = float(row["H"])
            row["l2_rel"] = float(row["l2_rel"])
            row["h1_rel"] = float(row["h1_rel"])
        _plot_msfem(rows, out)
        made.extend(["errors_l2.svg", "errors_h1.svg"])
    if not made:
        raise ConfigError(f"no CSVs found to plot in {archive_dir}")
    return made
