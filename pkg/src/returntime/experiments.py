"""Seed-deterministic experiment harness for the figure presets.

A run writes, into ``cfg.out``:

``distributions.csv``
    ``t, y_exact, y_meanfield, y_tree_combined, y_cycle_r`` for the first
    sampled node of the first graph, rows ``t = 1..T``.
``slopes.csv``
    ``n, node, k, slope_exact, slope_tree, slope_r, slope_popdyn_pred``,
    one row per sampled node of every graph.
``popdyn_slopes.csv``
    ``k, slope`` samples of the ensemble prediction (when popdyn runs).
``neighbourhoods.csv``
    ``n, node, nodes, edges`` of every r-neighbourhood (when ``r`` is set).
``manifest.json``
    Config echo, package versions, seeds, graph sizes, notes and per-stage
    runtimes. Everything except the runtimes is reproducible from the seed.

Missing values are written as empty fields.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, approx, cycle
from .errors import ReturnTimeError, ValidationError
from .exact import first_return_exact_many
from .graph import DegreeLaw, Graph, gen_gnm, gen_random_regular, gen_regular_sbm, read_edge_list
from .popdyn import node_slopes, popdyn_solve, predict_tail_slopes, write_slopes_csv
from .report import fmt
from .tailfit import fit_tail_slope

__all__ = ["ExperimentConfig", "PRESETS", "preset", "run_experiment", "StageError", "read_slopes"]

EXPERIMENTS = ("fig1_regular", "fig2_poisson", "fig3_sbm_fixed_c", "fig4_sbm_growing_c", "custom")
MODELS = ("regular", "gnm", "sbm", "file")


@dataclass
class ExperimentConfig:
    """Parameters of one experiment run.

    ``n`` lists graph sizes. For ``model="gnm"`` the edge count is ``m``
    when given, otherwise ``mean_degree * n / 2``. For ``model="sbm"`` the
    community count is ``c``, or ``n // group_size`` when ``group_size`` is
    set. ``nodes`` is the per-graph node sample size (``None`` for all
    nodes). ``r=None`` skips the neighbourhood approximation. The series
    part of the neighbourhood solver runs only on the first graph and only
    when its estimated memory fits ``cycle_series_mb``.
    """

    name: str
    seed: int
    model: str = "regular"
    n: tuple = (4096,)
    d: int = 6
    m: int | None = None
    mean_degree: float = 6.0
    c: int | None = None
    group_size: int | None = None
    in_frac: float = 2.0 / 3.0
    graph_path: str | None = None
    T: int = 200
    r: int | None = None
    rule: str = "edges"
    nodes: int | None = 10
    popdyn: bool = True
    popdyn_N: int = 100_000
    popdyn_sweeps: int = 1000
    popdyn_samples: int = 100_000
    cycle_series_mb: float = 2048.0
    out: str = "results"

    def validate(self) -> "ExperimentConfig":
        if self.name not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValidationError("an integer seed is mandatory")
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        if self.model == "file":
            if not self.graph_path:
                raise ValidationError("model 'file' needs graph_path")
            self.n = (0,)
        elif not self.n or min(self.n) < 2:
            raise ValidationError("graph sizes must be at least 2")
        if int(self.T) < 1:
            raise ValidationError("T must be positive")
        if self.r is not None and not 0 <= int(self.r) <= cycle.MAX_R:
            raise ValidationError(f"r must lie in 0..{cycle.MAX_R}")
        if self.nodes is not None and int(self.nodes) < 1:
            raise ValidationError("node sample size must be positive")
        if self.model == "sbm" and self.c is None and self.group_size is None:
            raise ValidationError("sbm needs c or group_size")
        return self


_DESK = {
    "fig1_regular": dict(model="regular", n=(4096,), d=6, T=200, nodes=10, r=None,
                         popdyn_N=10_000, popdyn_sweeps=200, popdyn_samples=10_000),
    "fig2_poisson": dict(model="gnm", n=(10_000,), m=30_000, T=200, nodes=None, r=None),
    "fig3_sbm_fixed_c": dict(model="sbm", n=(500, 1000, 2000, 4000), d=6, c=20, in_frac=2 / 3, T=200,
                             nodes=30, r=3, popdyn_N=10_000, popdyn_sweeps=200, popdyn_samples=10_000),
    "fig4_sbm_growing_c": dict(model="sbm", n=(500, 1000, 2000), d=6, group_size=20, in_frac=2 / 3, T=200,
                               nodes=30, r=3, popdyn_N=10_000, popdyn_sweeps=200, popdyn_samples=10_000),
    "custom": dict(),
}

_PAPER = {
    "fig1_regular": dict(_DESK["fig1_regular"], n=(2**15,)),
    "fig2_poisson": dict(_DESK["fig2_poisson"], n=(100_000,), m=300_000, nodes=10_000),
    "fig3_sbm_fixed_c": dict(_DESK["fig3_sbm_fixed_c"], n=(1000, 2000, 4000, 8000, 16000), nodes=100),
    "fig4_sbm_growing_c": dict(_DESK["fig4_sbm_growing_c"], n=(1000, 2000, 4000, 8000), nodes=100),
    "custom": dict(),
}

PRESETS = {"desk": _DESK, "paper": _PAPER}


def preset(name: str, scale: str = "desk", seed: int = 1, **overrides) -> ExperimentConfig:
    """Config for a named experiment; keyword overrides replace preset fields."""
    if scale not in PRESETS:
        raise ValidationError(f"unknown scale {scale!r}; choose 'desk' or 'paper'")
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    params = dict(PRESETS[scale][name])
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(name=name, seed=seed, **params).validate()


class StageError(ReturnTimeError):
    """Failure inside a named experiment stage; ``cause`` is the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class _Clock:
    def __init__(self):
        self.times = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (ReturnTimeError, ValueError, ArithmeticError, OSError, MemoryError) as e:
            raise StageError(name, e) from e
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


def _graph(cfg, n, seed) -> Graph:
    if cfg.model == "regular":
        return gen_random_regular(n, cfg.d, seed)
    if cfg.model == "gnm":
        m = cfg.m if cfg.m is not None else int(round(cfg.mean_degree * n / 2))
        return gen_gnm(n, m, seed)
    if cfg.model == "sbm":
        c = cfg.c if cfg.c is not None else n // cfg.group_size
        return gen_regular_sbm(n, cfg.d, c, cfg.in_frac, seed)
    return read_edge_list(cfg.graph_path)


def _law(cfg, g: Graph, n: int) -> DegreeLaw:
    # the law the generator samples from, not the kept component's empirical one
    if cfg.model in ("regular", "sbm"):
        return DegreeLaw.regular(cfg.d)
    if cfg.model == "gnm":
        m = cfg.m if cfg.m is not None else int(round(cfg.mean_degree * n / 2))
        return DegreeLaw.poisson(2.0 * m / n)
    return DegreeLaw.explicit(np.bincount(g.degrees) / g.n)


def _fit_slope(y):
    try:
        return fit_tail_slope(y).slope
    except ValidationError:
        return np.nan


def _h_slope(h):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(h > 1.0, -np.log1p(-1.0 / h), np.nan)


def _cell(x):
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else fmt(x)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg`` and write its report files; returns the manifest dict."""
    cfg.validate()
    out = Path(cfg.out)
    clock = _Clock()
    with clock.stage("setup"):
        out.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(int(cfg.seed))
    graph_ss = root.spawn(len(cfg.n))
    sample_ss, popdyn_ss, pred_ss = root.spawn(3)
    sample_rng = np.random.default_rng(sample_ss)
    T = int(cfg.T)
    notes = []
    graphs_info = []
    slope_rows = []
    dist = None
    i0 = None
    pop = None
    law = None
    r = None if cfg.r is None else int(cfg.r)
    nb_rows = []

    for gi, n in enumerate(cfg.n):
        with clock.stage("generate"):
            g = _graph(cfg, n, np.random.default_rng(graph_ss[gi]))
        graphs_info.append({"n": g.n, "m": g.m, "seed_spawn_key": list(graph_ss[gi].spawn_key)})
        with clock.stage("sample"):
            if cfg.nodes is None or cfg.nodes >= g.n:
                nodes = np.arange(g.n)
            else:
                nodes = np.sort(sample_rng.choice(g.n, size=int(cfg.nodes), replace=False))
            nodes = nodes[g.degrees[nodes] > 0]
        with clock.stage("exact"):
            Y = first_return_exact_many(g, nodes, T)
            s_exact = np.array([_fit_slope(y) for y in Y])
        with clock.stage("tree"):
            first = gi == 0
            dual = approx.tree_message_fixed_point(g, mode="dual")
            F1, F1p = approx.tree_marginal_stats(g, dual)
            h_tree = approx.tail_mean_array(2.0 * g.m, g.degrees, F1, F1p)
            s_tree = _h_slope(h_tree[nodes])
            if first:
                i0 = int(nodes[0])
                series = approx.tree_message_fixed_point(g, T, "series")
                rep = approx.combined_F(g, i0, T, series_msgs=series, dual_msgs=dual)
                dist = {"y_exact": Y[0], "y_meanfield": approx.mean_field_F(g, i0, T).coeffs,
                        "y_tree_combined": rep.y, "y_cycle_r": None}
        s_r = np.full(len(nodes), np.nan)
        if r is not None:
            with clock.stage("cycle"):
                model = cycle.CycleModel(g, r, cfg.rule)
                nb_rows += [(g.n, *row) for row in cycle.neighbourhood_sizes(model.nbhds).tolist()]
                cdual = cycle.cycle_message_fixed_point(g, r, mode="dual", model=model)
                v, dd = cycle.marginal_stats(model, cdual, nodes)
                h_r = approx.tail_mean_array(2.0 * g.m, g.degrees[nodes], v, dd)
                s_r = _h_slope(h_r)
                if first:
                    states = sum(len(s.local) for s in model.systems)
                    need_mb = 8.0 * (T + 1) * (2 * states + 2 * len(model.pairs)) / 2**20
                    if need_mb <= cfg.cycle_series_mb:
                        rep = cycle.final_F(g, i0, r, T, model=model, dual_msgs=cdual)
                        dist["y_cycle_r"] = rep.y
                    else:
                        notes.append(f"y_cycle_r skipped: series solve needs ~{need_mb:.0f} MB "
                                     f"> cycle_series_mb={cfg.cycle_series_mb:g}")
        s_pop = np.full(len(nodes), np.nan)
        if cfg.popdyn:
            with clock.stage("popdyn"):
                if pop is None:
                    law = _law(cfg, g, n)
                    pop = popdyn_solve(law, cfg.popdyn_N, cfg.popdyn_sweeps, np.random.default_rng(popdyn_ss))
                    pred = predict_tail_slopes(pop, law, g.n, cfg.popdyn_samples,
                                               np.random.default_rng(pred_ss.spawn(1)[0]), two_m=2.0 * g.m)
                    with open(out / "popdyn_slopes.csv", "w", newline="") as fh:
                        write_slopes_csv(pred, fh)
                    if pred.skipped:
                        notes.append(f"popdyn: {pred.skipped} prediction draws without a geometric tail skipped")
                s_pop = node_slopes(pop, g.degrees[nodes], 2.0 * g.m,
                                    np.random.default_rng(np.random.SeedSequence([int(cfg.seed), gi, 7])))
        for a, i in enumerate(nodes.tolist()):
            slope_rows.append((g.n, i, int(g.degrees[i]), s_exact[a], s_tree[a], s_r[a], s_pop[a]))

    with clock.stage("write"):
        with open(out / "distributions.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["y_exact", "y_meanfield", "y_tree_combined", "y_cycle_r"]
            w.writerow(["t"] + cols)
            for t in range(1, T + 1):
                w.writerow([t] + [("" if dist[c] is None else fmt(dist[c][t])) for c in cols])
        with open(out / "slopes.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "node", "k", "slope_exact", "slope_tree", "slope_r", "slope_popdyn_pred"])
            for n_, i, k, *vals in slope_rows:
                w.writerow([n_, i, k] + [_cell(float(v)) for v in vals])
        if nb_rows:
            with open(out / "neighbourhoods.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "node", "nodes", "edges"])
                w.writerows(nb_rows)
    manifest = {
        "config": dataclasses.asdict(cfg),
        "versions": _versions(),
        "seed": int(cfg.seed),
        "graphs": graphs_info,
        "distribution_node": i0,
        "notes": notes,
        "runtimes_s": {k: round(v, 3) for k, v in clock.times.items()},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(type(o).__name__)


def _versions() -> dict:
    import numba
    import scipy
    import sklearn

    return {"returntime": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "scikit-learn": sklearn.__version__}


def read_slopes(path) -> dict:
    """Load ``slopes.csv`` into arrays keyed by column; empty fields become ``nan``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = rows[0].keys() if rows else []
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in cols}

