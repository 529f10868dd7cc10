"""Evaluation suites over methods x scenarios x seeds and their reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from cebed.data import Dataset, ScenarioFamily, generate, split
from cebed.estimators import make_estimator
from cebed.grid import Profile, derive_seed
from cebed.metrics import ci95, gain_db, normalized_score, per_sample_mse
from cebed.models import MODEL_NAMES, canonical_name

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUITES = ("accuracy", "ood", "pilot_robustness", "spatial_robustness")
SUITE_ALIASES = {"pilot": "pilot_robustness", "spatial": "spatial_robustness"}
REFERENCE_METHODS = ("LS", "LMMSE", "ALMMSE")
TRAIN_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)
OOD_SNRS = (-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 25.0, 30.0)
SPEEDS = (0.0, 5.0, 10.0, 15.0)
PILOT_CONFIGS = ((72, 2), (72, 1), (36, 2), (36, 1))


def canonical_suite(name: str) -> str:
    name = SUITE_ALIASES.get(name, name)
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return name


def canonical_method(name: str) -> str:
    if name.upper() in REFERENCE_METHODS:
        return name.upper()
    return canonical_name(name)


@dataclass
class BenchConfig:
    """Scale knobs for a suite run; defaults follow the full benchmark."""

    n_samples: int = 15000
    master_seed: int = 0
    batch_size: int = 512
    max_epochs: int = 100
    almmse_rank: int | None = None
    hyper: dict = field(default_factory=dict)  # model name -> overrides
    profiles: tuple | None = None  # restrict profiles
    n_r: tuple | None = None  # restrict antenna counts
    jobs: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profiles"] = list(self.profiles) if self.profiles else None
        d["n_r"] = list(self.n_r) if self.n_r else None
        return d


@dataclass(frozen=True)
class SuiteScenario:
    train: ScenarioFamily
    test: ScenarioFamily | None = None  # None: evaluate on the train family's test split


def suite_scenarios(suite: str, config: BenchConfig = BenchConfig()) -> list[SuiteScenario]:
    suite = canonical_suite(suite)
    out = []
    if suite in ("accuracy", "ood"):
        for profile in (Profile.UMI_LIKE, Profile.UMA_LIKE):
            for n_r in (1, 4):
                fam = ScenarioFamily(profile, n_r, 72, 2, TRAIN_SNRS, SPEEDS)
                test = fam.replace(snr_domains=OOD_SNRS) if suite == "ood" else None
                out.append(SuiteScenario(fam, test))
    elif suite == "pilot_robustness":
        for n_fp, n_sp in PILOT_CONFIGS:
            out.append(SuiteScenario(ScenarioFamily(Profile.UMI_LIKE, 1, n_fp, n_sp, TRAIN_SNRS, (15.0,))))
    else:
        for n_r in (1, 4, 8, 16):
            out.append(SuiteScenario(ScenarioFamily(Profile.UMI_LIKE, n_r, 72, 2, TRAIN_SNRS, (5.0,))))
    if config.profiles:
        keep = {Profile.parse(p) for p in config.profiles}
        out = [s for s in out if s.train.profile in keep]
    if config.n_r:
        out = [s for s in out if s.train.n_r in set(config.n_r)]
    return out


def scenario_fields(family: ScenarioFamily) -> dict:
    return {
        "profile": family.profile.value,
        "n_r": family.n_r,
        "n_fp": family.n_fp,
        "n_sp": family.n_sp,
        "speeds": ";".join(f"{v:g}" for v in family.speed_domains),
    }


@dataclass
class EvalRecord:
    method: str
    scenario: str
    seed: int
    mse: float
    n_samples: int
    per_snr: dict = field(default_factory=dict)  # "snr" -> mse
    status: str = "ok"
    error: str = ""

    def __post_init__(self):
        if self.status == "ok" and not (self.mse >= 0):
            raise ValueError("mse must be >= 0")


def evaluate_methods(
    methods,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    seed: int,
    config: BenchConfig,
    scenario: str,
) -> list[EvalRecord]:
    """Fit every method on ``train`` (``val`` for early stopping) and score on ``test``."""
    records = []
    X_tr, X_va, X_te = train.observations(), val.observations(), test.observations()
    snrs = np.asarray(test.snr_db, dtype=float)
    for method in methods:
        try:
            if method in REFERENCE_METHODS:
                params = {"rank": config.almmse_rank} if method == "ALMMSE" else {}
                est = make_estimator(method, **params).fit(X_tr, train.h_true)
            else:
                est = make_estimator(
                    method,
                    hyper=config.hyper.get(method),
                    batch_size=config.batch_size,
                    max_epochs=config.max_epochs,
                    seed=derive_seed(seed, f"init/{method}"),
                ).fit(X_tr, train.h_true, eval_set=(X_va, val.h_true))
            errs = per_sample_mse(est.predict(X_te), test.h_true)
            per_snr = {f"{s:g}": float(errs[snrs == s].mean()) for s in np.unique(snrs)}
            records.append(EvalRecord(method, scenario, seed, float(errs.mean()), len(test), per_snr))
        except Exception as exc:  # noqa: BLE001 - reported as a flagged record
            log.exception("method %s failed on %s seed %d", method, scenario, seed)
            records.append(EvalRecord(method, scenario, seed, math.nan, len(test), {}, "failed", repr(exc)))
    return records


def _with_references(methods) -> list[str]:
    out = list(REFERENCE_METHODS)
    for m in methods:
        m = canonical_method(m)
        if m not in out:
            out.append(m)
    return out


def run_suite(
    suite: str,
    methods=(),
    n_seeds: int = 5,
    config: BenchConfig | None = None,
    datasets: dict | None = None,
) -> "BenchReport":
    """Run one evaluation suite.

    ``datasets`` optionally maps a scenario label to a pre-generated
    :class:`Dataset`; otherwise datasets are generated from ``config``.
    LS, LMMSE and ALMMSE are always evaluated.
    """
    suite = canonical_suite(suite)
    config = config or BenchConfig()
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    methods = _with_references(methods)
    scenarios = suite_scenarios(suite, config)
    if datasets:
        scenarios = [s for s in scenarios if s.train.label() in datasets] or [
            SuiteScenario(d.family, d.family.replace(snr_domains=OOD_SNRS) if suite == "ood" else None)
            for d in datasets.values()
        ]
        datasets = {d.family.label(): d for d in datasets.values()}
    if not scenarios:
        raise ValueError("no scenarios selected for this suite")

    base = {}
    hashes = {}
    for sc in scenarios:
        label = sc.train.label()
        if datasets and label in datasets:
            base[label] = datasets[label]
        else:
            base[label] = generate(sc.train, config.n_samples, derive_seed(config.master_seed, f"data/{label}"))
        hashes[label] = base[label].fingerprint()

    def job(sc: SuiteScenario, seed: int):
        label = sc.train.label()
        ds = base[label].subset(np.arange(len(base[label])))
        tr, va, te = split(ds, derive_seed(config.master_seed, "split", seed))
        if sc.test is not None:
            te = generate(sc.test, len(te), derive_seed(config.master_seed, f"ood/{label}", seed))
        return evaluate_methods(methods, tr, va, te, seed, config, label)

    seeds = list(range(n_seeds))
    jobs = [(sc, s) for sc in scenarios for s in seeds]
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as pool:
            results = list(pool.map(lambda a: job(*a), jobs))
    else:
        results = [job(*a) for a in jobs]
    records = [r for batch in results for r in batch]

    return BenchReport.aggregate(
        suite,
        records,
        {sc.train.label(): sc.train for sc in scenarios},
        metadata={
            "seeds": seeds,
            "methods": methods,
            "dataset_hashes": hashes,
            "config": config.to_dict(),
        },
    )


@dataclass
class ReportRow:
    method: str
    scenario: str
    fields: dict
    snr_db: str  # "all" or one SNR value
    seed_count: int
    mean_mse: float
    ci95: float | None
    gain_db: float | None
    norm_score: float | None
    partial: bool = False


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else x


@dataclass
class BenchReport:
    suite: str
    rows: list
    records: list
    metadata: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def aggregate(cls, suite: str, records: list, families: dict, metadata: dict | None = None) -> "BenchReport":
        """Reduce per-seed records into per-(method, scenario, SNR) rows.

        Records are sorted first, so the result does not depend on the
        order in which jobs finished.
        """
        records = sorted(records, key=lambda r: (r.scenario, r.method, r.seed))
        cells = {}
        for r in records:
            cells.setdefault((r.scenario, r.method), []).append(r)
        rows = []
        for (scenario, method), recs in sorted(cells.items()):
            ok = [r for r in recs if r.status == "ok"]
            partial = len(ok) != len(recs)
            keys = ["all"] + sorted({k for r in ok for k in r.per_snr}, key=float)
            for key in keys:
                vals = [r.mse if key == "all" else r.per_snr.get(key) for r in ok]
                vals = [v for v in vals if v is not None]
                if not vals:
                    continue
                mean = float(np.mean(vals))
                half = ci95(vals)[1] if len(vals) >= 2 else None
                rows.append(
                    ReportRow(method, scenario, scenario_fields(families[scenario]), key, len(vals), mean, half, None, None, partial)
                )
        index = {(r.scenario, r.snr_db, r.method): r for r in rows}
        for row in rows:
            ls = index.get((row.scenario, row.snr_db, "LS"))
            lmmse = index.get((row.scenario, row.snr_db, "LMMSE"))
            if ls is not None and ls.mean_mse > 0 and row.mean_mse > 0:
                row.gain_db = gain_db(ls.mean_mse, row.mean_mse)
            if ls is not None and lmmse is not None and lmmse.mean_mse != ls.mean_mse:
                row.norm_score = normalized_score(row.mean_mse, ls.mean_mse, lmmse.mean_mse)
        return cls(suite, rows, records, metadata or {})

    def row(self, method: str, scenario: str | None = None, snr_db="all") -> ReportRow:
        key = snr_db if isinstance(snr_db, str) else f"{float(snr_db):g}"
        for r in self.rows:
            if r.method == method and r.snr_db == key and (scenario is None or r.scenario == scenario):
                return r
        raise KeyError((method, scenario, snr_db))

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.status != "ok"]

    # serialisation --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "suite": self.suite,
            "metadata": self.metadata,
            "rows": [asdict(r) for r in self.rows],
            "records": [asdict(r) for r in self.records],
            "failures": [asdict(r) for r in self.failures],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')!r}")
        return cls(
            d["suite"],
            [ReportRow(**r) for r in d["rows"]],
            [EvalRecord(**r) for r in d["records"]],
            d.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        return cls.from_dict(json.loads(text))

    CSV_COLUMNS = (
        "schema_version",
        "suite",
        "method",
        "profile",
        "n_r",
        "n_fp",
        "n_sp",
        "speeds",
        "snr_db",
        "seed_count",
        "mean_mse",
        "ci95",
        "gain_db",
        "norm_score",
        "partial",
    )

    def table(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append(
                {
                    "schema_version": self.schema_version,
                    "suite": self.suite,
                    "method": r.method,
                    **r.fields,
                    "snr_db": r.snr_db,
                    "seed_count": r.seed_count,
                    "mean_mse": r.mean_mse,
                    "ci95": r.ci95,
                    "gain_db": r.gain_db,
                    "norm_score": r.norm_score,
                    "partial": r.partial,
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.table():
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_markdown(self, snr: str = "all") -> str:
        head = "| method | scenario | SNR | seeds | MSE | CI95 | gain (dB) | score |"
        lines = [f"### {self.suite}", "", head, "|" + "---|" * 8]

        def fmt(v, spec):
            return "-" if v is None else format(v, spec)

        for r in self.rows:
            if snr != "*" and r.snr_db != snr:
                continue
            flag = " (partial)" if r.partial else ""
            lines.append(
                f"| {r.method}{flag} | {r.scenario} | {r.snr_db} | {r.seed_count} | {r.mean_mse:.4g} | "
                f"{fmt(r.ci95, '.2g')} | {fmt(r.gain_db, '.2f')} | {fmt(r.norm_score, '.1f')} |"
            )
        return "\n".join(lines) + "\n"


def report_filename(suite: str, ext: str, when: float | None = None) -> str:
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime(when if when is not None else time.time()))
    return f"{suite}_{stamp}.{ext}"


__all__ = [
    "BenchConfig",
    "BenchReport",
    "EvalRecord",
    "MODEL_NAMES",
    "run_suite",
    "suite_scenarios",
]
