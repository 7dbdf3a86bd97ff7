"""Build, prepare, evolve and diagnose a configured scenario; write hashed artifacts."""
import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import scenarios as sc
from .profiles import surface_tension
from .string_geometry import CircleSurface, normal_frame, static_line
from .tubular_chart import build_chart, minimality_record, verify_metric_bounds

DRIFT_LIMIT = 1e-4
LIGHT_CONE_LIMIT = 1e-6
KAPPA1_QUARTIC = 2.0 * math.sqrt(2.0) / 3.0


@dataclass
class Check:
    name: str
    value: float
    threshold: object
    passed: bool

    def to_dict(self):
        return {"name": self.name, "value": _clean(self.value), "threshold": self.threshold,
                "passed": bool(self.passed)}


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    seed: int
    checks: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name, value, threshold, passed):
        self.checks.append(Check(name, value, threshold, bool(passed)))

    def content(self):
        """Deterministic report body (timings live in the manifest)."""
        return {"scenario": self.scenario, "config_hash": self.config_hash, "seed": self.seed,
                "versions": versions(), "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks], "runs": _clean(self.runs)}


def versions():
    import scipy
    return {"defectlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernels": kernels.BACKEND}


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactWriter:
    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def json(self, name, data):
        self.path(name).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                            for x in row])

    def svg(self, name, series, xlabel, ylabel, logy=False, logx=False):
        """Line plot of {label: (x, y)}; the SVG carries no date and a fixed id salt."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        matplotlib.rcParams["svg.hashsalt"] = "defectlab"
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, (x, y) in series.items():
            ax.plot(x, y, "o-", label=label, markersize=3)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logx:
            ax.set_xscale("log", base=2)
        if logy:
            ax.set_yscale("log", base=2)
        if len(series) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(self.path(name), format="svg", metadata={"Date": None})
        plt.close(fig)

    def manifest(self, report, extra=None):
        data = {"config_hash": report.config_hash, "seed": report.seed,
                "files": {name: sha256(self.out / name) for name in sorted(set(self.files))},
                "timings": report.timings}
        data.update(extra or {})
        (self.out / "manifest.json").write_text(json.dumps(_clean(data), indent=2,
                                                           sort_keys=True) + "\n")
        return data


def verify_manifest(out):
    """Re-hash the files listed in a run manifest; returns the names that differ."""
    out = Path(out)
    data = json.loads((out / "manifest.json").read_text())
    return [name for name, digest in data["files"].items()
            if not (out / name).exists() or sha256(out / name) != digest]


# ---------------------------------------------------------------------------
# scenario drivers


def _profile_checks(report):
    prof = sc.kink_profile()
    s = np.linspace(-15, 15, 3001)
    err = float(np.max(np.abs(prof(s) - np.tanh(s / math.sqrt(2.0)))))
    report.check("kink_profile_sup_error", err, 1e-8, err <= 1e-8)
    report.check("kink_first_integral_residual", prof.first_integral_residual, 1e-8,
                 prof.first_integral_residual <= 1e-8)
    kappa = surface_tension().kappa
    report.check("surface_tension_error", abs(kappa - KAPPA1_QUARTIC), 1e-10,
                 abs(kappa - KAPPA1_QUARTIC) <= 1e-10)


def _conservation(report, tag, drift, margin):
    report.check(f"energy_drift[{tag}]", drift, DRIFT_LIMIT, drift <= DRIFT_LIMIT)
    report.check(f"light_cone_margin[{tag}]", margin, LIGHT_CONE_LIMIT, margin <= LIGHT_CONE_LIMIT)


def _slope_check(report, name, x, y, lo, hi=None):
    if len(x) < 2:
        return None
    slope = sc.log2_slope(x, y)
    ok = slope >= lo and (hi is None or slope <= hi)
    report.check(name, slope, [lo, hi], ok)
    return slope


def _run_rigid(scenario, report, writer, threads):
    amplitude = 0.0 if scenario.surface == "static-plane" else scenario.amplitude
    ladder = scenario.h_ladder or [scenario.shape[0] if scenario.shape else 512]
    rows = []
    for eps in scenario.eps:
        errors = []
        for n in ladder:
            res = sc.run_rigid_kink(n, eps=eps, amplitude=amplitude, t_end=scenario.T0,
                                    cfl=scenario.cfl, threads=threads)
            tag = f"eps={eps:g},n={n}"
            report.timings[tag] = res.seconds
            report.runs.append({"eps": eps, "n": n, "h": res.h, "l2_error": res.error,
                                "energy_drift": res.drift[0], "light_cone_margin":
                                res.light_cone_margin})
            _conservation(report, tag, res.drift[0], res.light_cone_margin)
            if n >= 512:
                report.check(f"l2_error[{tag}]", res.error, 1e-3, res.error <= 1e-3)
            errors.append(res.error)
            rows.append((eps, n, res.h, res.error, res.drift[0], res.light_cone_margin))
        for (n0, e0), (n1, e1) in zip(zip(ladder, errors), zip(ladder[1:], errors[1:])):
            if n1 == 2 * n0:
                ratio = e0 / e1
                report.check(f"refinement_ratio[eps={eps:g},{n0}->{n1}]", ratio, [3.2, 4.8],
                             3.2 <= ratio <= 4.8)
    writer.csv("rigid_errors.csv", ["eps", "n", "h", "l2_error", "energy_drift",
                                    "light_cone_margin"], rows)


def _run_circle(scenario, report, writer, threads):
    probes = set(scenario.probes)
    runs = []
    for eps in scenario.eps:
        res = sc.run_circle(eps, radius=scenario.radius, rho0=scenario.rho0, T1=scenario.T1,
                            t_end=scenario.T0, half_width=scenario.half_width,
                            resolution=scenario.resolution, cfl=scenario.cfl, rho1=scenario.rho1,
                            zeta="zeta" in probes, gap="gap" in probes, d2e="d2e" in probes,
                            track="track" in probes, threads=threads)
        runs.append(res)
        tag = f"eps={eps:g}"
        summary = res.summary()
        report.timings.update({f"{tag}:{k}": v for k, v in summary.pop("timings").items()})
        report.runs.append(summary)
        _conservation(report, tag, res.drift[0], summary["light_cone_margin"])
        if res.radius_error is not None:
            horizon = 0.7 * math.pi * scenario.radius / 2
            tol = max(2 * max(res.grid.spacing), 5 * eps)
            sel = res.tracked_times <= horizon + 1e-12
            worst = float(np.max(res.radius_error[sel]))
            report.check(f"radius_tracking[{tag}]", worst, tol, worst <= tol)
            writer.csv(f"radius_eps{eps:g}.csv", ["t", "radius", "exact"],
                       zip(res.tracked_times, res.radii,
                           scenario.radius * np.cos(res.tracked_times / scenario.radius)))
        if res.series is not None:
            rows = res.series.to_rows()
            writer.csv(f"zeta_eps{eps:g}.csv", list(rows[0]), [list(r.values()) for r in rows])
        if res.gap is not None:
            writer.json(f"gap_eps{eps:g}.json", res.gap.to_dict())
        writer.json(f"preparedness_eps{eps:g}.json", summary["zeta0"])
    eps = [r.eps for r in runs]
    if "d2e" in probes:
        _slope_check(report, "d2e_slope", eps, [r.d2e for r in runs], 0.7, 1.3)
    if "gap" in probes:
        _slope_check(report, "gap_slope", eps, [r.gap.gap for r in runs], 0.8)
    if "zeta" in probes:
        ratios = [float(np.max(r.series.zeta3)) / r.zeta0.zeta0 for r in runs]
        for (e0, r0), (e1, r1) in zip(zip(eps, ratios), zip(eps[1:], ratios[1:])):
            report.check(f"zeta_ratio_growth[{e0:g}->{e1:g}]", r1 / r0, 1.25, r1 / r0 <= 1.25)
    if "track" in probes:
        writer.svg("radius.svg", {f"eps={r.eps:g}": (r.tracked_times, r.radii) for r in runs},
                   "t", "tracked radius")
    if "zeta" in probes:
        writer.svg("zeta.svg", {f"eps={r.eps:g}": (r.series.s, r.series.zeta3) for r in runs},
                   "s", "zeta_3")
    if "gap" in probes and len(runs) > 1:
        writer.svg("gap.svg", {"gap": (eps, [r.gap.gap for r in runs])}, "eps", "gap",
                   logx=True, logy=True)
    last = runs[-1].trajectory.snapshots[-1]
    last.save(writer.path("final_state.bin"))
    writer.files.append("final_state.bin.json")


def _run_wiggly(scenario, report, writer, threads):
    results = []
    for eps in scenario.eps:
        wavelength = 8.0 * eps
        start = time.time()
        res = sc.wiggly_gap(wavelength, ratio=scenario.ratio, resolution=int(scenario.resolution))
        report.timings[f"lambda={wavelength:g}"] = time.time() - start
        results.append(res)
        report.runs.append({"wavelength": wavelength, "eps": res.eps, "amplitude": res.amplitude,
                            "gap_to_limit": res.gap_to_limit, "gap_to_average": res.gap_to_average,
                            "matrix_error": res.matrix_error})
    first = results[0].gap_to_limit
    worst = min(r.gap_to_limit for r in results) / first
    report.check("gap_persistence", worst, 0.1, worst >= 0.1)
    if "matrix" in scenario.probes:
        lam = 8.0 * scenario.eps[0]
        coarse = sc.wiggly_matrix_error(lam, scenario.ratio, resolution=int(scenario.resolution))
        fine = sc.wiggly_matrix_error(lam, scenario.ratio, resolution=2 * int(scenario.resolution))
        report.check("tensor_matrix_refinement_ratio", coarse / fine, [3.2, 4.8],
                     3.2 <= coarse / fine <= 4.8)
    writer.csv("wiggly.csv", ["wavelength", "eps", "gap_to_limit", "gap_to_average",
                              "matrix_error"],
               [(r.wavelength, r.eps, r.gap_to_limit, r.gap_to_average, r.matrix_error)
                for r in results])


def _run_vortex(scenario, report, writer, threads):
    probes = set(scenario.probes)
    shape = tuple(scenario.shape) if scenario.shape else (384, 192, 192)
    consts = []
    for eps in scenario.eps:
        tag = f"eps={eps:g}"
        run = {"eps": eps}
        if "track" in probes:
            start = time.time()
            res = sc.run_rigid_vortex(eps, shape=shape, amplitude=scenario.amplitude,
                                      t_end=scenario.T0, cfl=scenario.cfl, threads=threads)
            report.timings[tag] = time.time() - start
            worst = float(np.max(res.errors))
            report.check(f"center_tracking[{tag}]", worst, res.tolerance, worst <= res.tolerance)
            _conservation(report, tag, res.drift[0], res.light_cone_margin)
            run.update(center_error=worst, tolerance=res.tolerance, energy_drift=res.drift[0],
                       light_cone_margin=res.light_cone_margin)
            writer.csv(f"centers_eps{eps:g}.csv", ["t", "max_center_error"],
                       zip(res.times, res.errors))
        if "energy" in probes:
            start = time.time()
            ratio, const = sc.vortex_energy_ratio(eps, threads=threads)
            report.timings[f"{tag}:energy"] = time.time() - start
            consts.append(const)
            run.update(energy_ratio=ratio, fitted_constant=const)
        report.runs.append(run)
    if len(consts) > 1:
        spread = max(consts) / min(consts) - 1.0 if min(consts) > 0 else float("inf")
        report.check("vortex_energy_constant_spread", spread, 0.25, abs(spread) <= 0.25)


_DRIVERS = {"static-plane": _run_rigid, "rigid-wiggle": _run_rigid, "circle": _run_circle,
            "wiggly-family": _run_wiggly, "rigid-vortex-line": _run_vortex}


def run_scenario(scenario, out=None, threads=1, seed=0):
    """Execute the scenario and write report.json, per-run tables, plots and manifest.json."""
    writer = ArtifactWriter(out or scenario.output)
    report = RunReport(scenario.name, scenario.content_hash(), seed)
    start = time.time()
    _profile_checks(report)
    _DRIVERS[scenario.surface](scenario, report, writer, threads)
    report.timings["total"] = time.time() - start
    writer.json("config.json", scenario.to_dict() | {"output": None})
    writer.json("report.json", report.content())
    writer.manifest(report)
    return report


# ---------------------------------------------------------------------------
# sweeps


def sweep(scenario, parameter, out=None, threads=1, seed=0):
    """Run the scenario over an eps ladder or an h ladder and fit a log-log slope."""
    values = scenario.eps if parameter == "eps" else scenario.h_ladder
    if len(values) < 3:
        raise ValueError(f"a sweep needs at least 3 values of {parameter}, got {len(values)}")
    if parameter == "h" and scenario.surface not in ("static-plane", "rigid-wiggle"):
        raise ValueError("h sweeps are defined for the rigid kink scenarios")
    writer = ArtifactWriter(out or scenario.output)
    report = RunReport(scenario.name, scenario.content_hash(), seed)
    start = time.time()
    sub = ArtifactWriter(writer.out / "runs")
    _DRIVERS[scenario.surface](scenario, report, sub, threads)
    report.timings["total"] = time.time() - start
    if parameter == "h":
        rows = [(r["h"], r["l2_error"]) for r in report.runs if r["eps"] == scenario.eps[0]]
        metric, expect = "l2_error", (1.6, 2.4)
    elif scenario.surface == "circle":
        rows = [(r["eps"], r["d2e"]) for r in report.runs]
        metric, expect = "d2e", (0.7, 1.3)
    elif scenario.surface == "wiggly-family":
        rows = [(r["eps"], r["gap_to_limit"]) for r in report.runs]
        metric, expect = "gap_to_limit", (None, None)
    elif scenario.surface == "rigid-vortex-line":
        rows = [(r["eps"], r["center_error"]) for r in report.runs]
        metric, expect = "center_error", (None, None)
    else:
        rows = [(r["eps"], r["l2_error"]) for r in report.runs]
        metric, expect = "l2_error", (None, None)
    x, y = np.array(rows).T
    slope = sc.log2_slope(x, y)
    ok = (expect[0] is None or slope >= expect[0]) and (expect[1] is None or slope <= expect[1])
    report.checks = [Check(f"{metric}_slope_vs_{parameter}", slope, list(expect), ok)]
    writer.csv("sweep.csv", [parameter, metric], rows)
    writer.svg("sweep.svg", {metric: (x, y)}, parameter, metric, logx=True, logy=True)
    for name in sub.files:
        writer.files.append(f"runs/{name}")
    body = report.content() | {"parameter": parameter, "metric": metric, "slope": slope}
    writer.json("sweep.json", body)
    writer.manifest(report)
    return report, slope


# ---------------------------------------------------------------------------
# chart verification


def scenario_chart(scenario):
    if scenario.surface == "circle":
        return sc.circle_chart(scenario.radius, scenario.rho0, scenario.T1)
    if scenario.surface == "static-plane":
        surf = static_line(1.0, 2)
        return build_chart(surf, normal_frame(surf, 1), scenario.rho0, scenario.T1,
                           spatial_period=[1.0, 0.0])
    if scenario.surface == "rigid-vortex-line":
        surf = static_line(1.0, 3)
        return build_chart(surf, normal_frame(surf, 2), scenario.rho0, scenario.T1,
                           spatial_period=[1.0, 0.0, 0.0])
    raise ValueError(f"chart verification is not available for '{scenario.surface}'")


def verify_chart(scenario, out=None, seed=0, samples=4000):
    """Metric inequalities with fitted constants plus minimality residuals (and a control)."""
    writer = ArtifactWriter(out or scenario.output)
    report = RunReport(scenario.name, scenario.content_hash(), seed)
    start = time.time()
    chart = scenario_chart(scenario)
    bounds = verify_metric_bounds(chart, samples=samples, seed=seed)
    for rec in bounds.records:
        ok = rec.passed and math.isfinite(rec.constant)
        report.check(f"bound[{rec.name}]", rec.constant, "finite", ok)
    minimal = minimality_record(chart)
    report.check("minimality_residual", minimal.constant, 1e-6, minimal.constant <= 1e-6)
    if scenario.surface == "circle":
        control = CircleSurface(scenario.radius, speed=0.8)
        control_chart = build_chart(control, normal_frame(control, 1, orientation=-1.0),
                                    scenario.rho0, scenario.T1)
        res = minimality_record(control_chart).constant
        report.check("control_minimality_residual", res, 1e-2, res >= 1e-2)
    report.timings["total"] = time.time() - start
    (writer.path("chart_bounds.json")).write_text(bounds.to_json() + "\n")
    chart.export_samples_csv(writer.path("chart_samples.csv"))
    writer.json("chart_report.json", report.content())
    writer.manifest(report)
    return report
