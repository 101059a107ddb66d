"""Run configuration and end-to-end orchestration.

Every stage writes into a scratch directory inside the output directory.
Files move into place only when the whole run succeeds, so a failed stage
leaves no partial artifacts. Each run writes ``manifest.json``, which holds
the resolved configuration along with input and output hashes.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import shutil
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import io as smkt_io
from .errors import ConfigError, DegenerateSeriesError, LengthError, PoolingError, SmktError, SplitError
from .leverage import average_curves, exponential_fit, return_volatility_correlation, split_periods
from .recurrence import analyze_threshold, collapse_check
from .rmt import (cij_histogram, correlation_matrix, deviating_modes, eigendecompose,
                  lambda_max_sweep, mp_density)
from .sectors import anti_correlation_scan, threshold_sweep
from .synth import (FactorPanelConfig, LeverageConfig, Sector, _leverage_raw, business_days,
                    generate_factor_panel, generate_volume_series)
from .timeseries import align_panel, log_returns, normalize, volatility, volume_returns

log = logging.getLogger(__name__)

ANALYSES = ("crosscorr", "sectors", "leverage", "recurrence", "synth", "report")

DEFAULTS = {
    "inputs": {"market": None, "labels": None},
    "out": "out",
    "seed": 0,
    "delta_t": 1,
    "crosscorr": {"cij_bins": 100, "eigen_bins": 60, "sweep": [250, 500, 1000, 1500, 2000]},
    "sectors": {
        "u_c": 0.08,
        "u_c_grid": [0.06, 0.08, 0.10, 0.12],
        "alphas": [1, 2, 3, 4, 5, 6, 7, 8],
        "alpha_max": 60,
        "n_samples": 200,
        "floor": 0.40,
        "orientation": "magnitude",
    },
    "leverage": {"index": None, "t_max": 40, "boundary": "2000-01-01", "fit_window": None,
                 "average": True},
    "recurrence": {"q_grid": [2.0, 3.0, 4.0, 5.0], "n_boot": 100, "bins_per_decade": 20,
                   "x_min": "scan", "min_tail": 50},
    "synth": {
        "N": 259,
        "T": 2000,
        "beta": 0.6,
        "noise": 1.0,
        "sectors": [
            {"size": 40, "loading": 0.5, "name": "BM"},
            {"size": 30, "loading": 0.5, "name": "IG"},
            {"size": 24, "loading": 0.45, "name": "RE"},
            {"size": 20, "loading": 0.45, "name": "Ener"},
        ],
        "innovations": "student-t",
        "df": 4.0,
        "start": "2003-01-02",
        "daily_vol": 0.02,
        "index": {"ticker": "IDX:SYN", "boundary": "2000-01-01", "T_before": 2000, "T_after": 2000,
                  "feedback_before": 0.1, "feedback_after": -0.1, "tau": 10.0},
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    analysis: str
    params: dict
    base_dir: Path

    @classmethod
    def load(cls, path, analysis, out=None, seed=None):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, analysis, path.parent, out, seed)

    @classmethod
    def from_dict(cls, raw, analysis, base_dir=".", out=None, seed=None):
        if analysis not in ANALYSES:
            raise ConfigError(f"unknown analysis {analysis!r}")
        params = _merge(DEFAULTS, raw)
        if out is not None:
            params["out"] = str(out)
        if seed is not None:
            params["seed"] = int(seed)
        cfg = cls(analysis, params, Path(base_dir))
        cfg.validate()
        return cfg

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_dir(self):
        return self.path(self.params["out"])

    def validate(self):
        p = self.params
        if not isinstance(p["seed"], int) or p["seed"] < 0 or p["seed"] >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not p["sectors"]["u_c_grid"] or not p["recurrence"]["q_grid"]:
            raise ConfigError("threshold grids must be nonempty")
        if self.analysis != "synth":
            market = p["inputs"].get("market")
            if not market:
                raise ConfigError("inputs.market is required")
            for key in ("market", "labels"):
                v = p["inputs"].get(key)
                if v and not self.path(v).exists():
                    raise ConfigError(f"inputs.{key}: {self.path(v)} does not exist")


class StageError(SmktError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.__cause__ = exc


def derive_seed(seed, *keys) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint64)[0])


def _tag(ticker):
    return "".join(ch if ch.isalnum() else "_" for ch in ticker)


class _Run:
    def __init__(self, cfg: RunConfig, scratch: Path):
        self.cfg = cfg
        self.p = cfg.params
        self.scratch = scratch
        self.outputs = []
        self.notes = {}
        self._cache = {}

    def emit_json(self, name, obj):
        smkt_io.write_json(self.scratch / name, obj)
        self.outputs.append(name)

    def emit_tsv(self, name, header, rows):
        smkt_io.write_tsv(self.scratch / name, header, rows)
        self.outputs.append(name)

    # -- inputs -----------------------------------------------------------

    def ingest(self, kind):
        key = ("ingest", kind)
        if key not in self._cache:
            path = self.cfg.path(self.p["inputs"]["market"])
            res = smkt_io.ingest_csv(path, kind)
            self.notes.setdefault("ingest", {})[kind] = {
                "rows": res.rows, "rejected": res.rejected, "series": len(res.data),
                "warnings": res.warnings,
            }
            self._cache[key] = res.data
        return self._cache[key]

    def labels(self):
        lp = self.p["inputs"].get("labels")
        if not lp:
            return {}
        return smkt_io.ingest_csv(self.cfg.path(lp), "labels").data

    def normalized(self, kind):
        key = ("norm", kind)
        if key in self._cache:
            return self._cache[key]
        series = self.ingest(kind)
        out, excluded = [], []
        for ticker, s in series.items():
            try:
                raw = volume_returns(s) if kind == "volume" else log_returns(s, self.p["delta_t"])
                out.append(normalize(raw))
            except (DegenerateSeriesError, LengthError) as exc:
                excluded.append(ticker)
                log.warning("excluding %s from %s analysis: %s", ticker, kind, exc)
        self.notes.setdefault("excluded", {})[kind] = excluded
        self._cache[key] = out
        return out

    def panel(self):
        if "panel" not in self._cache:
            panel = align_panel(self.normalized("price"))
            self.notes["panel"] = {
                "N": panel.N, "T": panel.T,
                "first_date": str(panel.dates[0]), "last_date": str(panel.dates[-1]),
                "dropped_dates": {t: int(d.size) for t, d in panel.dropped.items()},
                "alignment_policy": "intersection",
            }
            self._cache["panel"] = panel
        return self._cache["panel"]

    def spectrum(self):
        if "spectrum" not in self._cache:
            panel = self.panel()
            C = correlation_matrix(panel)
            self._cache["C"] = C
            self._cache["spectrum"] = eigendecompose(C, panel.T)
        return self._cache["C"], self._cache["spectrum"]

    # -- stages -------------------------------------------------------------

    def crosscorr(self):
        q = self.p["crosscorr"]
        panel = self.panel()
        C, spec = self.spectrum()
        edges, dens, mean = cij_histogram(C, bins=q["cij_bins"])
        self.emit_tsv("cij_hist.tsv", ["c_left", "c_right", "density"],
                      zip(edges[:-1], edges[1:], dens))
        lam = spec.eigenvalues
        hi = max(spec.bounds.lambda_max * 1.5, 3.0)
        counts, e = np.histogram(lam, bins=q["eigen_bins"], range=(0.0, hi))
        centers = 0.5 * (e[:-1] + e[1:])
        self.emit_tsv("eigen_hist.tsv", ["lambda", "density", "mp_density"],
                      zip(centers, counts / (lam.size * np.diff(e)), mp_density(centers, spec.bounds.Q)))
        sweep = [t for t in q["sweep"] if panel.N <= t <= panel.T]
        self.emit_tsv("lambda_max_sweep.tsv", ["T", "lambda_max"], lambda_max_sweep(panel, sweep))
        dev = deviating_modes(spec)
        summary = spec.to_dict()
        summary.update({
            "tickers": list(panel.tickers),
            "mean_cij": mean,
            "lambda_max": float(lam[0]),
            "lambda_min": float(lam[-1]),
            "deviating_modes": dev,
            "market_mode": 0 if 0 in dev else None,
        })
        self.emit_json("spectrum.json", summary)

    def sectors(self):
        q = self.p["sectors"]
        panel = self.panel()
        _, spec = self.spectrum()
        labels = self.labels()
        rows = threshold_sweep(spec, panel.tickers, labels, q["alphas"], q["u_c_grid"], q["floor"])
        self.emit_tsv("subsectors.tsv", ["alpha", "sign", "u_c", "size", "label", "fraction"],
                      [(r["alpha"], r["sign"], r["u_c"], r["size"], r["label"] or "", r["fraction"])
                       for r in rows])
        self.emit_json("subsectors.json", {"floor": q["floor"], "rows": rows,
                                           "sign_convention": spec.sign_convention})
        alpha_max = min(q["alpha_max"], panel.N - 1)
        rep = anti_correlation_scan(panel, spec, q["u_c"], alpha_max, q["n_samples"],
                                    derive_seed(self.p["seed"], 1), q["orientation"])
        self.emit_tsv("anticorr.tsv", ["alpha", "C_real", "C_rand", "stderr", "D"], rep.rows())
        self.emit_json("anticorr.json", rep.to_dict())

    def leverage(self):
        q = self.p["leverage"]
        index = self.ingest("index")
        wanted = q["index"] or sorted(index)
        if not wanted:
            raise LengthError("no index series (tickers prefixed IDX:) in the market file")
        fits, curves = {}, {"full": [], "before": [], "after": []}
        for ticker in wanted:
            if ticker not in index:
                raise LengthError(f"index series {ticker!r} not found")
            r = normalize(log_returns(index[ticker], self.p["delta_t"]))
            parts = {"full": r}
            try:
                parts["before"], parts["after"] = split_periods(r, q["boundary"])
            except SplitError as exc:
                log.info("%s: no period split (%s)", ticker, exc)
            for period, s in parts.items():
                c = return_volatility_correlation(s, q["t_max"])
                curves[period].append(c)
                fits[f"{ticker}/{period}"] = self._write_curve(f"{_tag(ticker)}_{period}", c)
        if q["average"] and len(wanted) > 1:
            for period, cs in curves.items():
                if len(cs) == len(wanted):
                    fits[f"average/{period}"] = self._write_curve(f"average_{period}", average_curves(cs))
        self.emit_json("leverage.json", {"boundary": q["boundary"], "t_max": q["t_max"],
                                         "index": wanted, "fits": fits})

    def _write_curve(self, name, curve):
        window = tuple(self.p["leverage"]["fit_window"] or (1, int(curve.lags[-1])))
        try:
            fit = exponential_fit(curve, window)
        except SmktError as exc:
            fit = None
            log.warning("leverage fit %s failed: %s", name, exc)
        fitted = fit(curve.lags) if fit is not None and fit.status == "ok" else [float("nan")] * curve.lags.size
        self.emit_tsv(f"leverage_{name}.tsv", ["t", "L", "fit", "samples"],
                      zip(curve.lags, curve.values, fitted, curve.counts))
        return None if fit is None else fit.to_dict()

    def recurrence(self):
        q = self.p["recurrence"]
        blocks = {}
        for k_id, kind in enumerate(("price", "volume")):
            vols = [volatility(s) for s in self.normalized(kind)]
            if not vols:
                continue
            dens = []
            blocks[kind] = []
            for j, thr in enumerate(q["q_grid"]):
                try:
                    dist = analyze_threshold(vols, thr, q["n_boot"], derive_seed(self.p["seed"], 2, k_id, j),
                                             q["bins_per_decade"], q["min_tail"], q["x_min"])
                except PoolingError as exc:
                    blocks[kind].append({"q": thr, "status": f"insufficient data: {exc}"})
                    continue
                d = dist.density
                dens.append(d)
                self.emit_tsv(f"recurrence_{kind}_q{thr:g}.tsv", ["x", "density", "error", "count"],
                              zip(d.centers, d.density, d.errors, d.counts))
                block = dist.fit_block()
                block["status"] = "ok" if dist.fit is not None else "fit failed"
                block["stocks"] = len(dist.means)
                blocks[kind].append(block)
            if len(dens) > 1:
                cc = collapse_check(dens)
                blocks[f"{kind}_collapse"] = {"passed": cc.passed, "max_z": cc.max_z}
        self.emit_json("recurrence.json", blocks)

    def synth(self):
        s = self.p["synth"]
        seed = self.p["seed"]
        sectors = tuple(Sector(d["size"], d["loading"], d.get("signed", True), d.get("name"))
                        for d in s["sectors"])
        tickers = [f"S{i:04d}" for i in range(s["N"])]
        cfg = FactorPanelConfig(s["N"], s["T"], s["beta"], sectors, s["noise"], derive_seed(seed, 10),
                                s["innovations"], s["df"], s["start"])
        panel, truth = generate_factor_panel(cfg, tickers)
        # one leading price day before the first return
        dates = business_days(s["start"], s["T"] + 1)
        logp = np.log(100.0) + np.concatenate([np.zeros((panel.N, 1)),
                                               np.cumsum(s["daily_vol"] * panel.matrix, axis=1)], axis=1)
        close = {t: (dates, np.exp(logp[i])) for i, t in enumerate(tickers)}
        volume = {t: (dates, generate_volume_series(s["T"] + 1, derive_seed(seed, 11, i)))
                  for i, t in enumerate(tickers)}

        ix = s["index"]
        b = np.busday_offset(np.datetime64(ix["boundary"], "D"), 0, roll="forward")
        first = np.busday_offset(b, -ix["T_before"] - 1, roll="forward")
        idx_dates = business_days(str(first), ix["T_before"] + ix["T_after"] + 1)
        r_idx = np.concatenate([
            _leverage_raw(LeverageConfig(ix["T_before"], feedback=ix["feedback_before"], tau=ix["tau"],
                                         seed=derive_seed(seed, 12))),
            _leverage_raw(LeverageConfig(ix["T_after"], feedback=ix["feedback_after"], tau=ix["tau"],
                                         seed=derive_seed(seed, 13))),
        ])
        close[ix["ticker"]] = (idx_dates, 1000.0 * np.exp(np.concatenate([[0.0], np.cumsum(0.01 * r_idx)])))
        volume[ix["ticker"]] = (idx_dates, generate_volume_series(idx_dates.size, derive_seed(seed, 14)))

        smkt_io.write_market_csv(self.scratch / "market.csv", close, volume)
        self.outputs.append("market.csv")
        labels = {t: (truth.sector[i] or "Misc") for i, t in enumerate(tickers)}
        smkt_io.write_labels_csv(self.scratch / "labels.csv", labels)
        self.outputs.append("labels.csv")
        gt = truth.to_dict(tickers)
        gt["index"] = {k: v for k, v in ix.items()}
        self.emit_json("ground_truth.json", gt)


STAGES = {
    "crosscorr": ("crosscorr",),
    "sectors": ("sectors",),
    "leverage": ("leverage",),
    "recurrence": ("recurrence",),
    "synth": ("synth",),
    "report": ("crosscorr", "sectors", "leverage", "recurrence"),
}


def run_pipeline(cfg: RunConfig) -> dict:
    """Run the stages selected by ``cfg.analysis``; returns ``{name: path}``."""
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    run = _Run(cfg, scratch)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for stage in STAGES[cfg.analysis]:
                try:
                    getattr(run, stage)()
                except StageError:
                    raise
                except (SmktError, ValueError, KeyError, ArithmeticError) as exc:
                    raise StageError(stage, exc) from exc
        inputs = {}
        for key in ("market", "labels"):
            v = cfg.params["inputs"].get(key)
            if v and cfg.analysis != "synth":
                inputs[key] = {"path": str(v), "sha256": smkt_io.sha256_file(cfg.path(v))}
        resolved = copy.deepcopy(cfg.params)
        resolved["out"] = str(out_dir.resolve())
        for key, v in resolved["inputs"].items():
            if v:
                resolved["inputs"][key] = str(cfg.path(v).resolve())
        manifest = {
            "smkt_version": __version__,
            "analysis": cfg.analysis,
            "config": resolved,
            "inputs": inputs,
            "notes": run.notes,
            "outputs": {name: smkt_io.sha256_file(scratch / name) for name in run.outputs},
        }
        smkt_io.write_json(scratch / "manifest.json", manifest)
        run.outputs.append("manifest.json")
        written = {}
        for name in run.outputs:
            os.replace(scratch / name, out_dir / name)
            written[name] = out_dir / name
        return written
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def rerun_from_manifest(manifest_path, out=None) -> dict:
    """Re-execute a run from its manifest alone."""
    manifest_path = Path(manifest_path)
    m = json.loads(manifest_path.read_text())
    cfg = RunConfig.from_dict(m["config"], m["analysis"], manifest_path.parent, out=out)
    return run_pipeline(cfg)
