"""Error norms and convergence-rate studies.

L-infinity errors use the fixed sampling of 51^2 = 2601 uniform reference
points per quadrilateral and C(52,2) = 1326 uniform barycentric points per
triangle.  Decay exponents are consecutive-level log2 ratios; errors below
the 1e-13 double-precision floor are excluded from rate assertions.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import assembly
from .interpolation import project
from .mesh import load_mesh
from .space import build_basis, dimension, frames

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["level", "h", "ndof", "err_linf", "err_l2", "err_h1",
               "err_h2", "gamma_linf", "gamma_l2", "gamma_h1", "gamma_h2"]
GAMMA_FLOOR = 1e-14       # below this a ratio is pure rounding noise
ASSERT_FLOOR = 1e-13      # errors at the double-precision floor count as exact


@lru_cache(maxsize=None)
def _linf_grid(kind, n=50):
    if kind == "quad":
        t = np.arange(n + 1) / n
        U, V = np.meshgrid(t, t, indexing="ij")
        return np.stack([U.ravel(), V.ravel()], axis=1)
    pts = [(i / n, j / n) for i in range(n + 1) for j in range(n + 1 - i)]
    return np.array(pts)


def error_linf(f_h, f, mesh=None):
    """max |f - f_h| over the fixed per-element sampling grids."""
    mesh = mesh or f_h.mesh
    fr = frames(mesh, f_h.p)
    worst = 0.0
    for elem, el in enumerate(mesh.elements):
        grid = _linf_grid(el.kind)
        vals = f_h.value_on(elem, grid)
        exact = f.value(fr.maps[elem](grid))
        worst = max(worst, float(np.abs(vals - exact).max()))
    return worst


def error_sobolev(f_h, f, mesh=None, order=0, relative=False):
    """L2 norm (order 0) or H1/H2 seminorm (order 1/2) of the error."""
    mesh = mesh or f_h.mesh
    p = f_h.p
    fr = frames(mesh, p)
    err2 = ref2 = 0.0
    for elem, el in enumerate(mesh.elements):
        rule = assembly.rule_for(el.kind, p)
        gmap = fr.maps[elem]
        w = rule.weights * np.abs(np.linalg.det(gmap.jacobian_at(rule.points)))
        jet = f_h.jet_on(elem, rule.points, order=order)
        x = gmap(rule.points)
        if order == 0:
            diff = jet["value"] - f.value(x)
            base = f.value(x)
            err2 += w @ diff**2
            ref2 += w @ base**2
        elif order == 1:
            diff = jet["gradient"] - f.gradient(x)
            base = f.gradient(x)
            err2 += w @ (diff**2).sum(axis=1)
            ref2 += w @ (base**2).sum(axis=1)
        else:
            diff = jet["hessian"] - f.hessian(x)
            base = f.hessian(x)
            err2 += w @ (diff**2).sum(axis=(1, 2))
            ref2 += w @ (base**2).sum(axis=(1, 2))
    if relative:
        return float(np.sqrt(err2 / ref2)) if ref2 > 0 else float(np.sqrt(err2))
    return float(np.sqrt(err2))


# ----------------------------------------------------------------------
# convergence studies
# ----------------------------------------------------------------------

@dataclass
class StudyConfig:
    experiment: str                  # interpolation | l2fit | biharmonic
    mesh: object                     # path, dict or MixedMesh
    p: int = 5
    levels: int = 4                  # runs refinement levels 0 .. levels-1
    fn: str = "paper"
    norms: tuple = ()                # extra norms for interpolation runs
    out: str = None
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in ("interpolation", "l2fit", "biharmonic"):
            raise ValueError("unknown experiment %r" % self.experiment)
        if self.p < 5:
            raise ValueError("degree must be >= 5")
        if self.levels < 1:
            raise ValueError("need at least one level")


@dataclass
class LevelResult:
    level: int
    h: float
    ndof: int
    errors: dict = field(default_factory=dict)
    gammas: dict = field(default_factory=dict)


class ErrorReport:
    """Per-level errors with decay exponents gamma = log2(err_prev/err)."""

    def __init__(self, config):
        self.config = config
        self.rows = []

    def add_level(self, level, h, ndof, errors):
        gammas = {}
        if self.rows:
            prev = self.rows[-1].errors
            for key, val in errors.items():
                pv = prev.get(key)
                if pv is not None and pv > GAMMA_FLOOR and val > GAMMA_FLOOR:
                    gammas[key] = float(np.log2(pv / val))
        self.rows.append(LevelResult(level, h, ndof, dict(errors), gammas))

    def final_gamma(self, key):
        if not self.rows:
            return None
        return self.rows[-1].gammas.get(key)

    def floor_limited(self, key):
        return (len(self.rows) > 0
                and self.rows[-1].errors.get(key, 1.0) < ASSERT_FLOOR)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            record = [str(row.level), "%.16e" % row.h, str(row.ndof)]
            for key in ("linf", "l2", "h1", "h2"):
                e = row.errors.get(key)
                record.append("" if e is None else "%.16e" % e)
            for key in ("linf", "l2", "h1", "h2"):
                g = row.gammas.get(key)
                record.append("" if g is None else "%.16e" % g)
            writer.writerow(record)
        return buf.getvalue()

    def summary(self):
        cfg = self.config
        lines = ["study %s: p=%d fn=%s levels=%d"
                 % (cfg.experiment, cfg.p, cfg.fn, cfg.levels)]
        header = "%5s %12s %8s" % ("level", "h", "ndof")
        keys = [k for k in ("linf", "l2", "h1", "h2")
                if any(k in r.errors for r in self.rows)]
        for k in keys:
            header += " %11s %9s" % ("err_" + k, "g_" + k)
        lines.append(header)
        for r in self.rows:
            line = "%5d %12.5e %8d" % (r.level, r.h, r.ndof)
            for k in keys:
                e = r.errors.get(k)
                g = r.gammas.get(k)
                line += " %11.4e" % e if e is not None else " %11s" % "-"
                if e is not None and e < ASSERT_FLOOR:
                    line += " %9s" % "exact"
                else:
                    line += " %9.4f" % g if g is not None else " %9s" % "-"
            lines.append(line)
        return "\n".join(lines)


def expected_rates(experiment, p):
    """Target decay exponents and tolerances at the final level."""
    if experiment == "interpolation":
        return {"linf": (p + 1, 0.3)}
    if experiment == "l2fit":
        return {"linf": (p + 1, 0.35), "l2": (p + 1, 0.35)}
    return {"l2": (p + 1, 0.35), "h1": (p, 0.35), "h2": (p - 1, 0.35)}


def check_rates(report):
    """Verify final-level decay exponents; floor-limited errors pass."""
    cfg = report.config
    failures = []
    for key, (target, tol) in expected_rates(cfg.experiment, cfg.p).items():
        if report.floor_limited(key):
            continue
        gamma = report.final_gamma(key)
        if gamma is None:
            failures.append("no rate available for %s" % key)
        elif abs(gamma - target) > tol:
            failures.append("rate %s = %.3f not within %.2f of %d"
                            % (key, gamma, tol, target))
    return failures


def convergence_study(config):
    """Run one experiment over successively refined meshes."""
    f = _resolve_function(config.fn)
    mesh = load_mesh(config.mesh)
    report = ErrorReport(config)
    for level in range(config.levels):
        if level > 0:
            mesh = mesh.refine()
        h = mesh.longest_edge()
        ndof = dimension(mesh, config.p)
        errors = {}
        if config.experiment == "interpolation":
            s = project(f, mesh, config.p)
            errors["linf"] = error_linf(s, f, mesh)
            for key in config.norms:
                order = {"l2": 0, "h1": 1, "h2": 2}[key]
                errors[key] = error_sobolev(s, f, mesh, order)
        elif config.experiment == "l2fit":
            basis = build_basis(mesh, config.p, threads=config.threads)
            s = assembly.l2_fit(f, basis)
            errors["linf"] = error_linf(s, f, mesh)
            errors["l2"] = error_sobolev(s, f, mesh, 0, relative=True)
        else:
            basis = build_basis(mesh, config.p, threads=config.threads)
            s = assembly.solve_biharmonic(f, basis)
            errors["l2"] = error_sobolev(s, f, mesh, 0, relative=True)
            errors["h1"] = error_sobolev(s, f, mesh, 1, relative=True)
            errors["h2"] = error_sobolev(s, f, mesh, 2, relative=True)
        report.add_level(level, h, ndof, errors)
        logger.info("level %d: h=%.4e ndof=%d %s", level, h, ndof,
                    " ".join("%s=%.3e" % kv for kv in errors.items()))
    return report


def _resolve_function(fid):
    from .functions import get_function
    return get_function(fid) if isinstance(fid, str) else fid


def render_figure(report, path):
    """Log-log convergence plot written next to the CSV report."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    hs = np.array([r.h for r in report.rows])
    keys = [k for k in ("linf", "l2", "h1", "h2")
            if any(k in r.errors for r in report.rows)]
    labels = {"linf": r"$L^\infty$", "l2": r"$L^2$",
              "h1": r"$H^1$", "h2": r"$H^2$"}
    for key in keys:
        errs = np.array([r.errors.get(key, np.nan) for r in report.rows])
        ax.loglog(hs, errs, "o-", label=labels[key])
    for key, (target, _) in expected_rates(report.config.experiment,
                                           report.config.p).items():
        if key not in keys:
            continue
        e_last = report.rows[-1].errors.get(key)
        if e_last and e_last > 0:
            ref = e_last * (hs / hs[-1]) ** target
            ax.loglog(hs, ref, "k:", linewidth=0.8)
            ax.annotate("h^%d" % target, (hs[0], ref[0]), fontsize=8,
                        textcoords="offset points", xytext=(4, 0))
    ax.set_xlabel("mesh size h")
    ax.set_ylabel("error")
    ax.set_title("%s, p=%d, fn=%s" % (report.config.experiment,
                                      report.config.p, report.config.fn))
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
