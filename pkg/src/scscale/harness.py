"""Experiment orchestration: configs, resumable curve runs, CSV persistence.

A run is described by one ExperimentConfig (built from a flat TOML file,
CLI flags, or both; flags win). run_experiment sweeps the (eps, N) grid,
simulates each point with the peeling decoder, optionally attaches
closed-form predictions, and persists everything through an on-disk
manifest so interrupted runs resume without redoing completed points.

Output files are versioned CSVs rebuilt atomically from the manifest,
which makes them byte-identical across reruns and worker counts.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # py310 fallback, same API
    import tomli as tomllib

from .ensemble import EnsembleSpec, Termination, validate_spec
from .errors import ManifestConflict, MissingParams, ValidationError
from .peeling import RunResult, run_trials
from .rng import derive_seed
from .scaling_law import LAWS, Prediction, ScalingParameters, load_params, predict

CSV_VERSION = "# scsale-v1"
SIMULATE_COLUMNS = "eps,N,trials,failures,expurgated,fer,fer_lo,fer_hi,ber,ber_lo,ber_hi"
PREDICT_COLUMNS = "eps,N,law,mu0,log_mu0,fer,ber"
MANIFEST_VERSION = 1


def _fmt(x) -> str:
    """Shortest exact decimal form; keeps CSV bodies reproducible."""
    return repr(float(x))


@dataclass
class ExperimentConfig:
    """Everything a curve run needs, normalized and validated."""
    dv: int
    dc: int
    L: int
    eps: tuple
    N: tuple
    trials: int
    seed: int = 0
    termination: str = "terminated"
    expurgate: bool = True
    laws: tuple = ("exponential", "erlang")
    params_path: str | None = None
    out: str = "curves.csv"
    predictions_out: str | None = None
    workers: int | None = None

    def __post_init__(self):
        self.dv = int(self.dv)
        self.dc = int(self.dc)
        self.L = int(self.L)
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        self.termination = Termination(self.termination).value
        if isinstance(self.eps, (int, float)):
            self.eps = (float(self.eps),)
        else:
            self.eps = tuple(float(e) for e in self.eps)
        if isinstance(self.N, int):
            self.N = (self.N,)
        else:
            self.N = tuple(int(n) for n in self.N)
        if isinstance(self.laws, str):
            self.laws = (self.laws,)
        else:
            self.laws = tuple(self.laws)
        if self.trials < 1:
            raise ValidationError(f"trials={self.trials} must be >= 1")
        if not self.eps:
            raise ValidationError("eps sweep is empty")
        for e in self.eps:
            if not 0.0 < e < 1.0:
                raise ValidationError(f"eps={e} outside (0, 1)")
        if not self.N:
            raise ValidationError("N sweep is empty")
        for n in self.N:
            if n < 1:
                raise ValidationError(f"N={n} must be >= 1")
        for law in self.laws:
            if law not in LAWS:
                raise ValidationError(f"unknown law {law!r}; choose from {LAWS}")
        if not self.out:
            raise ValidationError("output path is empty")
        # EnsembleSpec construction validates dv/dc/L and integrality of M
        for n in self.N:
            validate_spec(self.spec(n))

    def spec(self, N: int) -> EnsembleSpec:
        return EnsembleSpec(self.dv, self.dc, self.L, int(N),
                            Termination(self.termination))

    @property
    def wants_predictions(self) -> bool:
        return self.params_path is not None or self.predictions_out is not None

    def resolved_predictions_out(self) -> str:
        if self.predictions_out:
            return self.predictions_out
        root, ext = os.path.splitext(self.out)
        return root + ".predict" + (ext or ".csv")


_CONFIG_KEY_ALIASES = {"l": "L", "n": "N", "params": "params_path"}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def load_config_file(path: str) -> dict:
    """Flat TOML config; keys mirror the CLI flags one-to-one."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    out = {}
    for key, value in raw.items():
        key = _CONFIG_KEY_ALIASES.get(key, key)
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"unknown config key {key!r} in {path}")
        out[key] = value
    return out


def merge_config(file_values: dict, cli_values: dict) -> ExperimentConfig:
    """CLI flags override file values; None means 'flag not given'."""
    merged = dict(file_values)
    for key, value in cli_values.items():
        if value is not None:
            merged[key] = value
    missing = [k for k in ("dv", "dc", "L", "eps", "N", "trials")
               if k not in merged]
    if missing:
        raise ValidationError(f"missing required config keys: {missing}")
    return ExperimentConfig(**merged)


def config_hash(config: ExperimentConfig) -> str:
    """sha256 over the semantically relevant fields.

    Worker count and file paths do not affect results and are excluded;
    the content of the parameter file does affect predictions, so its
    digest is folded in when predictions are requested.
    """
    payload = {
        "dv": config.dv,
        "dc": config.dc,
        "L": config.L,
        "termination": config.termination,
        "eps": [_fmt(e) for e in config.eps],
        "N": list(config.N),
        "trials": config.trials,
        "seed": config.seed,
        "expurgate": bool(config.expurgate),
        "laws": list(config.laws),
        "params_digest": _params_digest(config),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _params_digest(config: ExperimentConfig) -> str | None:
    if not config.wants_predictions:
        return None
    if config.params_path is None or not os.path.exists(config.params_path):
        raise MissingParams(
            "predictions requested but no parameter file at "
            f"{config.params_path!r}")
    with open(config.params_path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@dataclass(frozen=True)
class CurvePoint:
    """One simulated (eps, N) grid point plus its model predictions."""
    eps: float
    N: int
    trials: int
    failures: int
    expurgated: int
    fer: float
    fer_lo: float
    fer_hi: float
    ber: float
    ber_lo: float
    ber_hi: float
    predictions: tuple = ()

    def __post_init__(self):
        for name in ("fer", "ber"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if not self.fer_lo <= self.fer <= self.fer_hi:
            raise ValidationError("FER interval does not bracket the estimate")
        if not self.ber_lo <= self.ber <= self.ber_hi:
            raise ValidationError("BER interval does not bracket the estimate")

    @classmethod
    def from_result(cls, result: RunResult, predictions=()) -> "CurvePoint":
        return cls(
            eps=result.eps, N=result.spec.N, trials=result.trials,
            failures=result.failures, expurgated=result.expurgated_failures,
            fer=result.fer, fer_lo=result.fer_lo, fer_hi=result.fer_hi,
            ber=result.ber, ber_lo=result.ber_lo, ber_hi=result.ber_hi,
            predictions=tuple(predictions),
        )

    def simulate_row(self) -> str:
        return ",".join([
            _fmt(self.eps), str(self.N), str(self.trials),
            str(self.failures), str(self.expurgated),
            _fmt(self.fer), _fmt(self.fer_lo), _fmt(self.fer_hi),
            _fmt(self.ber), _fmt(self.ber_lo), _fmt(self.ber_hi),
        ])

    def predict_rows(self) -> list[str]:
        rows = []
        for p in self.predictions:
            rows.append(",".join([
                _fmt(p.eps), str(p.N), p.law, _fmt(p.mu0),
                _fmt(p.log_mu0), _fmt(p.fer), _fmt(p.ber),
            ]))
        return rows

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "eps", "N", "trials", "failures", "expurgated",
            "fer", "fer_lo", "fer_hi", "ber", "ber_lo", "ber_hi")}
        d["predictions"] = [
            {"eps": p.eps, "N": p.N, "law": p.law, "mu0": float(p.mu0),
             "log_mu0": p.log_mu0, "fer": p.fer, "ber": p.ber}
            for p in self.predictions]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CurvePoint":
        preds = tuple(_StoredPrediction(**p) for p in d.pop("predictions", []))
        return cls(predictions=preds, **d)


@dataclass(frozen=True)
class _StoredPrediction:
    """Prediction columns round-tripped through the manifest."""
    eps: float
    N: int
    law: str
    mu0: float
    log_mu0: float
    fer: float
    ber: float


def write_text_atomic(path: str, text: str) -> None:
    """Write-all-or-nothing via a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(obj, path: str) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2) + "\n")


def write_csv(path: str, columns: str, rows) -> None:
    lines = [CSV_VERSION, columns]
    lines.extend(rows)
    write_text_atomic(path, "\n".join(lines) + "\n")


def manifest_path(out: str) -> str:
    return out + ".manifest.json"


def _point_key(eps: float, N: int) -> str:
    return f"{_fmt(eps)}@{int(N)}"


class Manifest:
    """Completed-point ledger living next to the output CSV."""

    def __init__(self, path: str, config_digest: str):
        self.path = path
        self.config_digest = config_digest
        self.points: dict[str, dict] = {}

    @classmethod
    def open(cls, out: str, config_digest: str) -> "Manifest":
        path = manifest_path(out)
        m = cls(path, config_digest)
        if os.path.exists(path):
            with open(path) as fh:
                stored = json.load(fh)
            if stored.get("config_hash") != config_digest:
                raise ManifestConflict(
                    f"{path} was written by a different config "
                    f"(stored {stored.get('config_hash')!r}, "
                    f"current {config_digest!r}); point it at a fresh "
                    "output path or delete the stale manifest")
            m.points = {p["key"]: p for p in stored.get("points", [])}
        return m

    def has(self, eps: float, N: int) -> bool:
        return _point_key(eps, N) in self.points

    def get(self, eps: float, N: int) -> CurvePoint:
        return CurvePoint.from_json(
            dict(self.points[_point_key(eps, N)]["point"]))

    def add(self, point: CurvePoint) -> None:
        key = _point_key(point.eps, point.N)
        self.points[key] = {"key": key, "point": point.to_json()}
        self.save()

    def save(self) -> None:
        write_json_atomic({
            "version": MANIFEST_VERSION,
            "config_hash": self.config_digest,
            "points": [self.points[k] for k in sorted(self.points)],
        }, self.path)


def run_experiment(config: ExperimentConfig, progress=None) -> list[CurvePoint]:
    """Sweep the config's (eps, N) grid; returns the curve points in order.

    Completed points recorded in the manifest are not re-simulated; the
    CSVs are rebuilt from the manifest after every point, so a rerun of
    a finished config only rewrites identical files.
    """
    params: ScalingParameters | None = None
    if config.wants_predictions:
        if config.params_path is None:
            raise MissingParams("predictions requested without a parameter file")
        params = load_params(config.params_path)

    digest = config_hash(config)
    manifest = Manifest.open(config.out, digest)

    points: list[CurvePoint] = []
    for N in config.N:
        for eps in config.eps:
            if manifest.has(eps, N):
                points.append(manifest.get(eps, N))
                continue
            point_seed = derive_seed(config.seed, "simulate", str(N), _fmt(eps))
            result = run_trials(config.spec(N), eps, config.trials, point_seed,
                                expurgate=config.expurgate,
                                workers=config.workers)
            preds = []
            if params is not None:
                for law in config.laws:
                    preds.append(predict(params, eps, N, law=law))
            point = CurvePoint.from_result(result, preds)
            manifest.add(point)
            points.append(point)
            _write_outputs(config, manifest)
            if progress is not None:
                progress(point)
    _write_outputs(config, manifest)
    return points


def _write_outputs(config: ExperimentConfig, manifest: Manifest) -> None:
    sim_rows, pred_rows = [], []
    for N in config.N:
        for eps in config.eps:
            if not manifest.has(eps, N):
                continue
            point = manifest.get(eps, N)
            sim_rows.append(point.simulate_row())
            pred_rows.extend(point.predict_rows())
    write_csv(config.out, SIMULATE_COLUMNS, sim_rows)
    if config.wants_predictions:
        write_csv(config.resolved_predictions_out(), PREDICT_COLUMNS, pred_rows)


def predictions_csv(params: ScalingParameters, eps_values, n_values, laws,
                    path: str, beta_from_eps_l: bool = False) -> list[Prediction]:
    """Prediction-only sweep (no simulation); same CSV schema."""
    rows, preds = [], []
    for N in n_values:
        for eps in eps_values:
            for law in laws:
                p = predict(params, eps, int(N), law=law,
                            beta_from_eps_l=beta_from_eps_l)
                preds.append(p)
                rows.append(",".join([
                    _fmt(p.eps), str(p.N), p.law, _fmt(p.mu0),
                    _fmt(p.log_mu0), _fmt(p.fer), _fmt(p.ber)]))
    write_csv(path, PREDICT_COLUMNS, rows)
    return preds
