"""Dataset assembly and the seeded experiment runner.

Assembly joins each transcript to its ticker's price series and its
sector's reference index, computes the requested label, and reports every
exclusion with a reason. Experiments then fit one method per sector on the
training years and score the held-out year, repeated over seeds, with all
randomness derived from the experiment seed so two runs with the same
config produce byte-identical tables.

Leakage rule: nothing derived from test-year rows feeds training. Document
-vector vocabularies and training come from train-year text by default
(test vectors are inferred with frozen word matrices), standardization
constants come from the training split inside each head, and dimension
selection uses a validation slice carved from the training years. The
``all_text`` embedding mode relaxes the vocabulary restriction for callers
who want embeddings trained on the full corpus; it is off by default.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .classifiers import Evaluation, FeatureMatrix, HeadConfig, evaluate, fit_head, predict
from .corpus import SECTOR_SHORT, TranscriptRecord, reference_index, tokenize
from .docembed import PvdmConfig, build_vocab, infer_vector, train_pvdm
from .errors import DataError, FileUnreadable, InsufficientData, MissingPrice, ValidationError
from .gnn import StockGnnModel, TrainConfig, forward_classify, train
from .labels import LabeledExample, PriceSeries, compute_ibl, compute_sbl, compute_vbl, perf_vector
from .sentiment import Lexicon, score
from .textgraph import attach_features, build_text_graph, load_word_vectors
from .util import derive_seed

logger = logging.getLogger(__name__)

METHODS = ("StockGNN", "DEsvm", "DElogreg", "DEmlp", "SE-mlp", "sentiment-mlp", "combined-mlp")

FIVE_MAJOR_SECTORS = ("Fin", "Health", "Mat", "Service", "Tech")


# --- label specification and dataset assembly -------------------------------


@dataclass(frozen=True)
class LabelSpec:
    kind: str  # "value" | "shock" | "index"
    tau: float = defaults.SBL_TAU
    k: int = 5

    def __post_init__(self):
        if self.kind not in ("value", "shock", "index"):
            raise ValidationError(f"label kind must be value, shock, or index: {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau": self.tau, "k": self.k}


@dataclass
class ExclusionReport:
    reasons: dict[str, int] = field(default_factory=dict)
    excluded: list[tuple[str, str]] = field(default_factory=list)

    def add(self, transcript_id: str, reason: str):
        self.reasons[reason] = self.reasons.get(reason, 0) + 1
        self.excluded.append((transcript_id, reason))


def assemble_dataset(
    records: list[TranscriptRecord],
    prices: dict[str, PriceSeries],
    indices: dict[str, PriceSeries],
    spec: LabelSpec,
) -> tuple[list[LabeledExample], ExclusionReport]:
    """Label every transcript that has the data for it; report the rest."""
    examples: list[LabeledExample] = []
    report = ExclusionReport()
    for rec in records:
        series = prices.get(rec.ticker)
        if series is None:
            report.add(rec.id, "missing prices")
            continue
        try:
            if spec.kind == "value":
                label = compute_vbl(series, rec.call_date)
            elif spec.kind == "shock":
                label = compute_sbl(series, rec.call_date, spec.tau)
                if label is None:
                    report.add(rec.id, "below tau")
                    continue
            else:
                index_symbol = reference_index(rec.sector)
                index = indices.get(index_symbol)
                if index is None:
                    report.add(rec.id, f"missing index {index_symbol}")
                    continue
                vector = perf_vector(series, index, rec.call_date)
                label = compute_ibl(vector, spec.k)
                if label is None:
                    report.add(rec.id, "no k-majority")
                    continue
        except MissingPrice:
            report.add(rec.id, "missing prices")
            continue
        examples.append(LabeledExample(
            transcript_id=rec.id, label_kind=spec.kind, label=label,
            tau=spec.tau if spec.kind == "shock" else None,
            k=spec.k if spec.kind == "index" else None,
        ))
    if report.reasons:
        logger.info("assembled %d examples, excluded %d: %s",
                    len(examples), len(report.excluded), report.reasons)
    return examples, report


# --- fundamentals ------------------------------------------------------------


@dataclass(frozen=True)
class FundamentalsRecord:
    ticker: str
    date: dt.date
    actual_sales: float
    estimated_sales: float
    actual_eps: float
    estimated_eps: float


def load_fundamentals_csv(path) -> list[FundamentalsRecord]:
    fields = ["ticker", "date", "actual_sales", "estimated_sales", "actual_eps", "estimated_eps"]
    records = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(fields) <= set(reader.fieldnames):
                raise FileUnreadable(f"{path}: expected header {','.join(fields)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    records.append(FundamentalsRecord(
                        ticker=row["ticker"].strip(),
                        date=dt.date.fromisoformat(row["date"].strip()),
                        actual_sales=float(row["actual_sales"]),
                        estimated_sales=float(row["estimated_sales"]),
                        actual_eps=float(row["actual_eps"]),
                        estimated_eps=float(row["estimated_eps"]),
                    ))
                except ValueError as exc:
                    raise FileUnreadable(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    return records


def join_fundamentals(
    record: TranscriptRecord,
    fundamentals: list[FundamentalsRecord],
    max_gap_days: int = 3,
) -> FundamentalsRecord | None:
    """Nearest same-ticker fundamentals row within the gap; earlier wins ties."""
    best = None
    best_key = None
    for f in fundamentals:
        if f.ticker != record.ticker:
            continue
        gap = abs((f.date - record.call_date).days)
        if gap > max_gap_days:
            continue
        key = (gap, f.date)
        if best_key is None or key < best_key:
            best, best_key = f, key
    return best


# --- experiment configuration -------------------------------------------------


@dataclass
class EmbedSettings:
    dims: tuple[int, ...] = defaults.DOCEMBED_DIMS
    lr: float = defaults.DOCEMBED_LR
    negatives: int = defaults.DOCEMBED_NEGATIVES
    min_count: int = defaults.DOCEMBED_MIN_COUNT
    window: int = defaults.DOCEMBED_WINDOW
    epochs: int = 10
    infer_steps: int = 10
    mode: str = "train_infer"  # | "all_text"

    def __post_init__(self):
        if self.mode not in ("train_infer", "all_text"):
            raise ValidationError(f"embed mode must be train_infer or all_text: {self.mode!r}")
        self.dims = tuple(self.dims)


@dataclass
class GnnSettings:
    feature_dim: int = defaults.NODE_FEATURE_DIM
    graph_dim: int = defaults.GRAPH_EMBEDDING_DIM
    hops: int = defaults.GNN_HOPS
    window: int = defaults.GRAPH_WINDOW
    head_hidden: int = 64
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = defaults.BATCH_SIZE
    patience: int = 5
    val_fraction: float = 0.15
    feature_seed: int = 0  # fallback node-feature stream


@dataclass
class HeadSettings:
    lr: float = 0.5
    epochs: int = 300
    l2: float = 0.0
    batch_size: int = defaults.BATCH_SIZE
    hidden: int | None = None
    output: str = "sigmoid"

    def config(self, seed: int, output: str | None = None) -> HeadConfig:
        return HeadConfig(lr=self.lr, epochs=self.epochs, l2=self.l2,
                          batch_size=self.batch_size, seed=seed,
                          hidden=self.hidden, output=output or self.output)


@dataclass
class ExperimentConfig:
    label: LabelSpec
    method: str
    sectors: tuple[str, ...] = FIVE_MAJOR_SECTORS
    seeds: tuple[int, ...] = tuple(range(defaults.MIN_SEEDS))
    train_max_year: int = defaults.TRAIN_MAX_YEAR
    test_year: int = defaults.TEST_YEAR
    min_examples: int = defaults.MIN_EXAMPLES
    embed: EmbedSettings = field(default_factory=EmbedSettings)
    gnn: GnnSettings = field(default_factory=GnnSettings)
    head: HeadSettings = field(default_factory=HeadSettings)
    workers: int = 1
    vectors_path: str | None = None
    save_checkpoints: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        self.sectors = tuple(self.sectors)
        self.seeds = tuple(self.seeds)
        if len(self.seeds) == 0:
            raise ValidationError("at least one seed is required")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["label"] = self.label.to_dict()
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown experiment config keys: {sorted(unknown)}")
        data = dict(raw)
        try:
            data["label"] = LabelSpec(**data["label"]) if isinstance(data.get("label"), dict) else data["label"]
            for key, factory in (("embed", EmbedSettings), ("gnn", GnnSettings), ("head", HeadSettings)):
                if isinstance(data.get(key), dict):
                    data[key] = factory(**data[key])
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(f"bad experiment config: {exc}") from exc


# --- inputs bundle ------------------------------------------------------------


@dataclass
class Inputs:
    """Loaded data shared by all experiment jobs; read-only after load."""

    records: list[TranscriptRecord]
    prices: dict[str, PriceSeries] = field(default_factory=dict)
    indices: dict[str, PriceSeries] = field(default_factory=dict)
    lexicon: Lexicon | None = None
    fundamentals: list[FundamentalsRecord] = field(default_factory=list)
    recommendations: list = field(default_factory=list)
    tokens_cache: dict[str, list[str]] = field(default_factory=dict)

    def record_by_id(self) -> dict[str, TranscriptRecord]:
        return {r.id: r for r in self.records}

    def tokens(self, record: TranscriptRecord) -> list[str]:
        cached = self.tokens_cache.get(record.id)
        if cached is None:
            cached = tokenize(record.text)
            self.tokens_cache[record.id] = cached
        return cached


# --- result table -------------------------------------------------------------


METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall")


@dataclass
class ResultCell:
    sector: str
    method: str
    n_train: int
    n_test: int
    n_seeds: int
    means: dict[str, float]
    stds: dict[str, float]


@dataclass
class ResultTable:
    cells: list[ResultCell]

    def sorted_cells(self) -> list[ResultCell]:
        return sorted(self.cells, key=lambda c: (c.sector, c.method))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["sector", "method", "n_train", "n_test", "n_seeds"]
            for m in METRIC_NAMES:
                header += [f"{m}_mean", f"{m}_std"]
            writer.writerow(header)
            for cell in self.sorted_cells():
                row = [cell.sector, cell.method, cell.n_train, cell.n_test, cell.n_seeds]
                for m in METRIC_NAMES:
                    row += [repr(cell.means[m]), repr(cell.stds[m])]
                writer.writerow(row)

    def render_text(self) -> str:
        lines = [f"{'sector':<10}{'method':<15}{'train':>7}{'test':>6}"
                 + "".join(f"{m:>26}" for m in METRIC_NAMES)]
        for cell in self.sorted_cells():
            row = f"{cell.sector:<10}{cell.method:<15}{cell.n_train:>7}{cell.n_test:>6}"
            for m in METRIC_NAMES:
                row += f"{cell.means[m]:>17.4f} ± {cell.stds[m]:<6.4f}"
            lines.append(row)
        return "\n".join(lines) + "\n"


# --- feature construction -----------------------------------------------------


def _split_by_year(
    examples: list[LabeledExample],
    records: dict[str, TranscriptRecord],
    config: ExperimentConfig,
    sector_full: str,
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    train_rows, test_rows = [], []
    for ex in examples:
        rec = records[ex.transcript_id]
        if rec.sector != sector_full:
            continue
        if rec.call_date.year <= config.train_max_year:
            train_rows.append(ex)
        elif rec.call_date.year == config.test_year:
            test_rows.append(ex)
    return train_rows, test_rows


def _doc_vectors(
    train_ids: list[str],
    test_ids: list[str],
    inputs: Inputs,
    settings: EmbedSettings,
    dim: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Document vectors for both splits under the configured mode."""
    records = inputs.record_by_id()
    train_docs = [(i, inputs.tokens(records[i])) for i in train_ids]
    test_docs = [(i, inputs.tokens(records[i])) for i in test_ids]
    config = PvdmConfig(dim=dim, lr=settings.lr, negatives=settings.negatives,
                        window=settings.window, epochs=settings.epochs,
                        seed=derive_seed(seed, "pvdm", dim))
    if settings.mode == "all_text":
        corpus = train_docs + test_docs
        vocab = build_vocab([t for _, t in corpus], settings.min_count)
        model = train_pvdm(corpus, vocab, config)
        return model.vectors_by_id()
    vocab = build_vocab([t for _, t in train_docs], settings.min_count)
    model = train_pvdm(train_docs, vocab, config)
    vectors = model.vectors_by_id()
    for doc_id, tokens in test_docs:
        vectors[doc_id] = infer_vector(
            tokens, model, steps=settings.infer_steps,
            seed=derive_seed(seed, "infer", dim, doc_id),
        )
    return vectors


def _sentiment_features(ids: list[str], inputs: Inputs) -> np.ndarray:
    if inputs.lexicon is None:
        raise DataError("sentiment features requested but no lexicon loaded")
    records = inputs.record_by_id()
    names = inputs.lexicon.names()
    rows = []
    for i in ids:
        scores = score(inputs.tokens(records[i]), inputs.lexicon)
        rows.append([scores[c] for c in names])
    return np.asarray(rows, dtype=np.float64)


def _se_features(
    ids: list[str], inputs: Inputs
) -> tuple[np.ndarray, list[str]]:
    """Sales/EPS rows; ids without a joinable fundamentals row are dropped."""
    records = inputs.record_by_id()
    rows, kept = [], []
    for i in ids:
        f = join_fundamentals(records[i], inputs.fundamentals)
        if f is None:
            continue
        rows.append([f.actual_sales, f.estimated_sales, f.actual_eps, f.estimated_eps])
        kept.append(i)
    return np.asarray(rows, dtype=np.float64), kept


# --- single experiment job ----------------------------------------------------


def _carve_validation(ids: list[str], labels: list[int], fraction: float, seed: int):
    order = np.random.default_rng(seed).permutation(len(ids))
    n_val = max(1, int(round(fraction * len(ids))))
    val_idx = set(order[:n_val].tolist())
    sub = [i for i in range(len(ids)) if i not in val_idx]
    val = [i for i in range(len(ids)) if i in val_idx]
    return sub, val


def _fit_eval_head(
    kind: str,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    head_config: HeadConfig,
    provenance: str,
) -> Evaluation:
    head = fit_head(kind, FeatureMatrix(x_train, y_train, provenance), head_config)
    labels, _ = predict(head, x_test)
    return evaluate(labels, y_test)


def _run_embedding_method(
    method: str,
    train_ids: list[str],
    y_train: np.ndarray,
    test_ids: list[str],
    y_test: np.ndarray,
    inputs: Inputs,
    config: ExperimentConfig,
    seed: int,
) -> Evaluation:
    """DE* heads and combined features, with dimension selection on a
    validation slice carved from the training years."""
    kind = {"DEsvm": "linear-svm", "DElogreg": "logreg", "DEmlp": "mlp",
            "combined-mlp": "mlp"}[method]
    provenance = "combined" if method == "combined-mlp" else "transcript-embedding"

    def features_for(dim, ids_train, ids_eval):
        vectors = _doc_vectors(ids_train, ids_eval, inputs, config.embed, dim, seed)
        x_tr = np.stack([vectors[i] for i in ids_train])
        x_ev = np.stack([vectors[i] for i in ids_eval])
        if method == "combined-mlp":
            x_tr = np.hstack([x_tr, _sentiment_features(ids_train, inputs)])
            x_ev = np.hstack([x_ev, _sentiment_features(ids_eval, inputs)])
        return x_tr, x_ev

    dims = config.embed.dims
    best_dim = dims[0]
    if len(dims) > 1:
        sub, val = _carve_validation(train_ids, y_train.tolist(), 0.25,
                                     derive_seed(seed, "dimselect"))
        ids_sub = [train_ids[i] for i in sub]
        ids_val = [train_ids[i] for i in val]
        best_acc = -1.0
        for dim in dims:
            x_sub, x_val = features_for(dim, ids_sub, ids_val)
            ev = _fit_eval_head(kind, x_sub, y_train[sub], x_val, y_train[val],
                                config.head.config(derive_seed(seed, "head", dim)),
                                provenance)
            if ev.accuracy > best_acc:
                best_acc, best_dim = ev.accuracy, dim

    x_train, x_test = features_for(best_dim, train_ids, test_ids)
    return _fit_eval_head(kind, x_train, y_train, x_test, y_test,
                          config.head.config(derive_seed(seed, "head", best_dim)),
                          provenance)


def _run_stockgnn(
    train_ids: list[str],
    y_train: np.ndarray,
    test_ids: list[str],
    y_test: np.ndarray,
    inputs: Inputs,
    config: ExperimentConfig,
    seed: int,
    word_table: dict[str, np.ndarray],
    checkpoint_path=None,
) -> Evaluation:
    records = inputs.record_by_id()
    gcfg = config.gnn
    dim = config.embed.dims[0]
    vectors = _doc_vectors(train_ids, test_ids, inputs, config.embed, dim, seed)

    def example(ex_id, label):
        g = build_text_graph(inputs.tokens(records[ex_id]), gcfg.window)
        attach_features(g, word_table, gcfg.feature_dim, seed=gcfg.feature_seed)
        return g, vectors[ex_id], int(label)

    train_examples = [example(i, y) for i, y in zip(train_ids, y_train)]
    test_examples = [example(i, y) for i, y in zip(test_ids, y_test)]

    model = StockGnnModel.init(
        gcfg.feature_dim, seed=derive_seed(seed, "gnn-init"),
        d_out=gcfg.graph_dim, doc_dim=dim, head_hidden=gcfg.head_hidden,
        hops=gcfg.hops,
    )
    val_set = None
    fit_set = train_examples
    if gcfg.val_fraction > 0 and len(train_examples) >= 10:
        sub, val = _carve_validation(train_ids, y_train.tolist(), gcfg.val_fraction,
                                     derive_seed(seed, "gnn-val"))
        fit_set = [train_examples[i] for i in sub]
        val_set = [train_examples[i] for i in val]
    tcfg = TrainConfig(lr=gcfg.lr, epochs=gcfg.epochs, batch_size=gcfg.batch_size,
                       seed=derive_seed(seed, "gnn-train"), patience=gcfg.patience)
    train(fit_set, model, tcfg, val_set=val_set)
    if checkpoint_path is not None:
        from .gnn import save_checkpoint

        save_checkpoint(model, checkpoint_path, tcfg)
    preds = np.array([int(forward_classify(g, model, doc)[1] >= 0.5)
                      for g, doc, _ in test_examples])
    return evaluate(preds, y_test)


def _run_one(
    sector_short: str,
    seed: int,
    examples_by_sector: dict[str, tuple[list, list]],
    inputs: Inputs,
    config: ExperimentConfig,
    word_table: dict[str, np.ndarray],
    checkpoint_dir=None,
) -> Evaluation:
    train_rows, test_rows = examples_by_sector[sector_short]
    train_ids = [e.transcript_id for e in train_rows]
    test_ids = [e.transcript_id for e in test_rows]
    y_train = np.array([e.label for e in train_rows])
    y_test = np.array([e.label for e in test_rows])

    method = config.method
    if method in ("DEsvm", "DElogreg", "DEmlp", "combined-mlp"):
        return _run_embedding_method(method, train_ids, y_train, test_ids, y_test,
                                     inputs, config, seed)
    if method == "sentiment-mlp":
        return _fit_eval_head(
            "mlp", _sentiment_features(train_ids, inputs), y_train,
            _sentiment_features(test_ids, inputs), y_test,
            config.head.config(derive_seed(seed, "head", "sentiment")),
            "sentiment",
        )
    if method == "SE-mlp":
        x_train, kept_train = _se_features(train_ids, inputs)
        x_test, kept_test = _se_features(test_ids, inputs)
        if len(kept_train) < config.min_examples or len(kept_test) < config.min_examples:
            raise InsufficientData(
                f"{sector_short}: only {len(kept_train)}/{len(kept_test)} rows "
                "have joinable fundamentals"
            )
        keep_tr = {i for i in kept_train}
        keep_te = {i for i in kept_test}
        y_tr = np.array([e.label for e in train_rows if e.transcript_id in keep_tr])
        y_te = np.array([e.label for e in test_rows if e.transcript_id in keep_te])
        return _fit_eval_head(
            "mlp", x_train, y_tr, x_test, y_te,
            config.head.config(derive_seed(seed, "head", "se"), output="softmax"),
            "SE",
        )
    if method == "StockGNN":
        checkpoint = None
        if checkpoint_dir is not None:
            checkpoint = checkpoint_dir / f"stockgnn_{sector_short}_{seed}.json"
        return _run_stockgnn(train_ids, y_train, test_ids, y_test, inputs, config,
                             seed, word_table, checkpoint_path=checkpoint)
    raise ValidationError(f"unhandled method {method!r}")


def run_experiment(
    config: ExperimentConfig,
    inputs: Inputs,
    checkpoint_dir=None,
) -> ResultTable:
    """Fit and score the configured method per sector, repeated over seeds."""
    short_to_full = {v: k for k, v in SECTOR_SHORT.items()}
    examples, _ = assemble_dataset(inputs.records, inputs.prices, inputs.indices,
                                   config.label)
    records = inputs.record_by_id()

    examples_by_sector: dict[str, tuple[list, list]] = {}
    for sector_short in config.sectors:
        full = short_to_full.get(sector_short)
        if full is None:
            raise ValidationError(f"unknown sector {sector_short!r}")
        train_rows, test_rows = _split_by_year(examples, records, config, full)
        if len(train_rows) < config.min_examples or len(test_rows) < config.min_examples:
            raise InsufficientData(
                f"{sector_short}: {len(train_rows)} train / {len(test_rows)} test "
                f"examples, need {config.min_examples}"
            )
        examples_by_sector[sector_short] = (train_rows, test_rows)

    word_table: dict[str, np.ndarray] = {}
    if config.vectors_path:
        word_table, table_dim = load_word_vectors(config.vectors_path)
        if table_dim != config.gnn.feature_dim:
            raise ValidationError(
                f"vector table dimension {table_dim} does not match configured "
                f"node feature dimension {config.gnn.feature_dim}"
            )

    jobs = [(sector, seed) for sector in config.sectors for seed in config.seeds]

    def run_job(job):
        sector, seed = job
        return job, _run_one(sector, seed, examples_by_sector, inputs, config,
                             word_table, checkpoint_dir=checkpoint_dir)

    results: dict[tuple[str, int], Evaluation] = {}
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for job, ev in pool.map(run_job, jobs):
                results[job] = ev
    else:
        for job in jobs:
            key, ev = run_job(job)
            results[key] = ev

    cells = []
    for sector in config.sectors:
        evals = [results[(sector, seed)] for seed in config.seeds]
        values = {m: np.array([getattr(e, m) for e in evals]) for m in METRIC_NAMES}
        train_rows, test_rows = examples_by_sector[sector]
        cells.append(ResultCell(
            sector=sector, method=config.method,
            n_train=len(train_rows), n_test=len(test_rows),
            n_seeds=len(config.seeds),
            means={m: float(v.mean()) for m, v in values.items()},
            stds={m: float(v.std()) for m, v in values.items()},
        ))
    return ResultTable(cells=cells)
