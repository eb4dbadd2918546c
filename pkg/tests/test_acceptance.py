"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; each test enforces its stated tolerance and runtime budget.
"""

import datetime as dt
import functools
import json
import math
import tempfile
import time
from pathlib import Path

import numpy as np
from synth import planted_corpus, write_inputs

from ecpipe import defaults
from ecpipe.classifiers import evaluate
from ecpipe.corpus import tokenize
from ecpipe.gnn import (
    GatedGnnParams,
    StockGnnModel,
    TrainConfig,
    forward_classify,
    run_gnn,
    train,
)
from ecpipe.harness import (
    EmbedSettings,
    ExperimentConfig,
    GnnSettings,
    HeadSettings,
    Inputs,
    LabelSpec,
    run_experiment,
)
from ecpipe.labels import (
    PriceSeries,
    compute_ibl,
    compute_sbl,
    compute_vbl,
    perf_vector,
)
from ecpipe.recommendations import PRIOR_1M, RATINGS, RecommendationRecord, compute_mar
from ecpipe.textgraph import TextGraph, attach_features, build_text_graph

D = dt.date


def criterion(number, description):
    def decorator(fn):
        @functools.wraps(fn)
        def wrapper():
            try:
                fn()
            except BaseException:
                print(f"\n[acceptance] criterion {number:02d} FAIL  {description}")
                raise
            print(f"\n[acceptance] criterion {number:02d} PASS  {description}")

        return wrapper

    return decorator


def weekday_series(symbol, start, closes):
    rows = []
    day = start
    for c in closes:
        while day.weekday() >= 5:
            day += dt.timedelta(days=1)
        rows.append((day, c))
        day += dt.timedelta(days=1)
    dates, values = zip(*rows)
    return PriceSeries(symbol=symbol, dates=tuple(dates), closes=tuple(values))


# --- 1: label oracles -------------------------------------------------------


def oracle_vbl(closes, i):
    return 1 if closes[i + 1] > closes[i - 1] else 0


def oracle_sbl(closes, i, tau):
    if (closes[i + 1] - closes[i - 1]) / closes[i - 1] >= tau:
        return 1
    if (closes[i - 1] - closes[i + 1]) / closes[i - 1] >= tau:
        return 0
    return None


def oracle_perf(stock, index, i):
    out = []
    for j in range(i + 1, i + 6):
        rs = (stock[j] - stock[j - 1]) / stock[j - 1]
        ri = (index[j] - index[j - 1]) / index[j - 1]
        out.append(1 if rs > ri else 0)
    return out


def oracle_ibl(vector, k):
    ones = sum(vector)
    if ones >= k:
        return 1
    if 5 - ones >= k:
        return 0
    return None


@criterion(1, "label functions match the transliterated definitions on 1000 series")
def test_c01_label_oracles():
    start_time = time.time()
    rng = np.random.default_rng(101)
    monday = D(2014, 6, 2)
    for _ in range(1000):
        stock_closes = list(rng.uniform(1.0, 900.0, size=10))
        index_closes = list(rng.uniform(10.0, 9000.0, size=10))
        stock = weekday_series("S", monday, stock_closes)
        index = weekday_series("I", monday, index_closes)
        i = int(rng.integers(1, 5))
        d = stock.dates[i]
        assert compute_vbl(stock, d) == oracle_vbl(stock_closes, i)
        tau = float(rng.uniform(0.001, 0.3))
        assert compute_sbl(stock, d, tau) == oracle_sbl(stock_closes, i, tau)
        if i + 5 < 10:
            v = perf_vector(stock, index, d)
            assert list(v.entries) == oracle_perf(stock_closes, index_closes, i)
            for k in (3, 4, 5):
                assert compute_ibl(v, k) == oracle_ibl(v.entries, k)
    elapsed = time.time() - start_time
    assert elapsed < 5.0, f"label oracle run took {elapsed:.1f}s"


# --- 2: gated propagation correctness ---------------------------------------


def sigmoid_scalar(v):
    return 1.0 / (1.0 + math.exp(-v))


def oracle_step(z, adjacency, params):
    n, d = len(z), len(z[0])

    def rows_times(mat, weights):
        return [[sum(mat[i][m] * weights[m][j] for m in range(d)) for j in range(d)]
                for i in range(n)]

    neighbor_sum = [[sum(adjacency[i][u] * z[u][m] for u in range(n)) for m in range(d)]
                    for i in range(n)]
    a = rows_times(neighbor_sum, params["w_a"])
    ax, zx = rows_times(a, params["w_x"]), rows_times(z, params["u_x"])
    ar, zr = rows_times(a, params["w_r"]), rows_times(z, params["u_r"])
    az = rows_times(a, params["w_z"])
    x = [[sigmoid_scalar(ax[i][j] + zx[i][j] + params["b_x"][j]) for j in range(d)]
         for i in range(n)]
    r = [[sigmoid_scalar(ar[i][j] + zr[i][j] + params["b_r"][j]) for j in range(d)]
         for i in range(n)]
    rz = rows_times([[r[i][j] * z[i][j] for j in range(d)] for i in range(n)],
                    params["u_z"])
    zhat = [[math.tanh(az[i][j] + rz[i][j] + params["b_z"][j]) for j in range(d)]
            for i in range(n)]
    return [[zhat[i][j] + z[i][j] * (1.0 - x[i][j]) for j in range(d)] for i in range(n)]


def random_graph(rng, n, d):
    adjacency = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                adjacency[i, j] = adjacency[j, i] = 1.0
    g = TextGraph(nodes=[f"w{i}" for i in range(n)], adjacency=adjacency)
    g.node_features = rng.normal(size=(n, d))
    return g


def plain_params(p):
    out = {}
    for name, t in p.tensors().items():
        out[name] = t.data[0].tolist() if name.startswith("b") else t.data.tolist()
    return out


@criterion(2, "zero-parameter 2-hop run returns 0.25x features; random instances "
              "match the loop oracle to 1e-12")
def test_c02_gated_gnn():
    start_time = time.time()
    rng = np.random.default_rng(202)
    g = random_graph(rng, 5, 4)
    out = run_gnn(g, GatedGnnParams.zeros(4), k=2)
    assert np.array_equal(out, 0.25 * g.node_features)

    for _ in range(40):
        n = int(rng.integers(1, 6))  # |V| <= 5
        d = int(rng.integers(1, 5))  # d <= 4
        g = random_graph(rng, n, d)
        p = GatedGnnParams.init(d, rng)
        plain = plain_params(p)
        expect = oracle_step(g.node_features.tolist(), g.adjacency.tolist(), plain)
        expect = oracle_step(expect, g.adjacency.tolist(), plain)
        got = run_gnn(g, p, k=2)
        assert np.max(np.abs(got - np.asarray(expect))) < 1e-12
    elapsed = time.time() - start_time
    assert elapsed < 5.0, f"gated propagation checks took {elapsed:.1f}s"


# --- 3: gradient checks -------------------------------------------------------


@criterion(3, "analytic gradients of the full loss match central differences "
              "to 1e-4 on 10 instances")
def test_c03_gradient_checks():
    from ecpipe.autodiff import softmax_cross_entropy
    from ecpipe.gnn import _forward_logits_t

    start_time = time.time()
    rng = np.random.default_rng(303)
    step = 1e-5
    for trial in range(10):
        n = int(rng.integers(3, 6))
        d = int(rng.integers(2, 4))
        doc_dim = 2
        g = random_graph(rng, n, d)
        doc = rng.normal(size=doc_dim)
        label = int(rng.integers(0, 2))
        model = StockGnnModel.init(d, seed=1000 + trial, d_out=3, doc_dim=doc_dim,
                                   head_hidden=4)

        def loss_tensor():
            return softmax_cross_entropy(_forward_logits_t(g, model, doc),
                                         np.array([label]))

        loss = loss_tensor()
        model.zero_grads()
        loss.backward()
        worst = 0.0
        for name, t in model.tensors().items():
            analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
            it = np.nditer(t.data, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                original = t.data[idx]
                t.data[idx] = original + step
                up = loss_tensor().item()
                t.data[idx] = original - step
                down = loss_tensor().item()
                t.data[idx] = original
                numeric = (up - down) / (2 * step)
                rel = abs(analytic[idx] - numeric) / max(abs(analytic[idx]),
                                                         abs(numeric), 1e-6)
                worst = max(worst, rel)
                it.iternext()
        assert worst < 1e-4, f"instance {trial}: max relative error {worst}"
    elapsed = time.time() - start_time
    assert elapsed < 30.0, f"gradient checks took {elapsed:.1f}s"


# --- 4: permutation invariance --------------------------------------------------


@criterion(4, "node permutation moves the graph embedding by less than 1e-12 "
              "on 50 graphs")
def test_c04_permutation_invariance():
    from ecpipe.gnn import aggregate

    rng = np.random.default_rng(404)
    for trial in range(50):
        n = int(rng.integers(2, 9))
        d = 3
        g = random_graph(rng, n, d)
        model = StockGnnModel.init(d, seed=2000 + trial, d_out=4, head_hidden=4)
        base = aggregate(run_gnn(g, model.gnn, k=2), model.aggregator)
        perm = rng.permutation(n)
        permuted = TextGraph(
            nodes=[g.nodes[i] for i in perm],
            adjacency=g.adjacency[np.ix_(perm, perm)],
        )
        permuted.node_features = g.node_features[perm]
        other = aggregate(run_gnn(permuted, model.gnn, k=2), model.aggregator)
        assert np.max(np.abs(base - other)) < 1e-12


# --- 5: end-to-end behavior ------------------------------------------------------


def experiment_config(method, seeds, embed_epochs, gnn_epochs, val_fraction=0.1):
    return ExperimentConfig(
        label=LabelSpec("value"), method=method, sectors=("Tech",), seeds=seeds,
        min_examples=10,
        embed=EmbedSettings(dims=(12,), epochs=embed_epochs, window=3, lr=0.1,
                            min_count=1, infer_steps=embed_epochs),
        gnn=GnnSettings(feature_dim=8, graph_dim=8, hops=2, head_hidden=8,
                        lr=0.3, epochs=gnn_epochs, val_fraction=val_fraction),
        head=HeadSettings(lr=0.5, epochs=150, hidden=8),
    )


@criterion(5, "memorizes 20 documents, recovers a planted marker (test accuracy "
              ">= 0.9), and stays near chance on shuffled labels")
def test_c05_end_to_end():
    start_time = time.time()

    # memorization capacity: 20 documents with arbitrary (shuffled) labels
    records, _, labels = planted_corpus(20, seed=1, shuffle_labels=True)
    dataset = []
    for r in records:
        g = build_text_graph(tokenize(r.text), 3)
        attach_features(g, {}, 16, seed=0)
        dataset.append((g, None, labels[r.id]))
    model = StockGnnModel.init(16, seed=0, d_out=16, doc_dim=0, head_hidden=32)
    train(dataset, model, TrainConfig(lr=0.5, epochs=200, seed=0, batch_size=4))
    train_acc = np.mean([int(forward_classify(g, model)[1] >= 0.5) == y
                         for g, _, y in dataset])
    assert train_acc == 1.0, f"memorization accuracy {train_acc}"

    # planted-marker recovery: 400 documents, train 300 / test 100
    records, prices, _ = planted_corpus(400, seed=42)
    inputs = Inputs(records=records, prices=prices)
    table = run_experiment(experiment_config("StockGNN", (0,), 20, 15), inputs)
    cell = table.cells[0]
    assert cell.n_train == 300 and cell.n_test == 100
    assert cell.means["accuracy"] >= 0.9, f"planted accuracy {cell.means['accuracy']}"

    # permutation null: shuffled labels stay within 0.5 +/- 0.1 macro recall
    records, prices, _ = planted_corpus(200, seed=99, shuffle_labels=True)
    inputs = Inputs(records=records, prices=prices)
    table = run_experiment(
        experiment_config("StockGNN", tuple(range(10)), 6, 6, val_fraction=0.0),
        inputs,
    )
    recall = table.cells[0].means["macro_recall"]
    assert abs(recall - 0.5) <= 0.1, f"shuffled macro recall {recall}"

    elapsed = time.time() - start_time
    assert elapsed < 300.0, f"end-to-end run took {elapsed:.1f}s"


# --- 6: base-rate claim ------------------------------------------------------------


@criterion(6, "a constant classifier scores macro recall exactly 0.5 on any "
              "two-class test set")
def test_c06_base_rate():
    rng = np.random.default_rng(606)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 60))
        truth = rng.integers(0, 2, size=n)
        if len(set(truth.tolist())) < 2:
            continue
        for constant in (0, 1):
            ev = evaluate(np.full(n, constant), truth)
            assert ev.macro_recall == 0.5
        checked += 1


# --- 7: econometrics ------------------------------------------------------------------


@criterion(7, "intercept-only BIC matches the closed form, simulated coefficients "
              "land within 3 SEs, and nested grids keep likelihood monotone")
def test_c07_econometrics():
    from ecpipe.econometrics import (
        DesignMatrix,
        ModelSpec,
        build_design,
        fit_logit,
        incremental_grid,
        run_model_grid,
    )

    start_time = time.time()

    # closed-form intercept-only reference
    rows = [{"y": 1}] * 50 + [{"y": 0}] * 50
    report = fit_logit(build_design(rows, ModelSpec(dependent="y")))
    expected_bic = math.log(100) - 2 * 100 * math.log(0.5)
    assert abs(report.bic - expected_bic) < 1e-6

    # coverage: known coefficients on simulated data
    rng = np.random.default_rng(707)
    n = 20000
    hits = 0
    for _ in range(100):
        x = rng.normal(size=(n, 1))
        eta = 0.5 - 1.0 * x[:, 0]
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
        design = DesignMatrix(x=np.hstack([np.ones((n, 1)), x]), y=y,
                              columns=["intercept", "x"], n_dropped=0,
                              drop_reasons={}, row_index=list(range(n)))
        rep = fit_logit(design)
        ok = (abs(rep.coef[0] - 0.5) < 3 * rep.se[0]
              and abs(rep.coef[1] + 1.0) < 3 * rep.se[1])
        hits += int(ok)
    assert hits >= 95, f"coverage {hits}/100"

    # nested likelihood monotonicity on a complete-case grid
    grid_rows = []
    for _ in range(1200):
        pos = float(rng.normal(2.0, 1.0))
        neg = float(rng.normal(1.0, 0.6))
        sector = ["Fin", "Tech", "Health"][int(rng.integers(3))]
        year = str(int(rng.integers(2016, 2020)))
        mar = RATINGS[int(rng.integers(len(RATINGS)))]
        eta = 0.3 + 0.5 * pos - 0.8 * neg
        grid_rows.append({"y": int(rng.random() < 1 / (1 + math.exp(-eta))),
                          "pos": pos, "neg": neg, "sector": sector,
                          "year": year, "mar": mar})
    specs = incremental_grid("y", [
        ("m1", ["pos", "neg"], []),
        ("m2", [], ["mar"]),
        ("m3", [], ["sector"]),
        ("m4", [], ["year"]),
    ])
    reports = run_model_grid(grid_rows, specs)
    assert len({r.n for r in reports}) == 1
    logls = [r.log_likelihood for r in reports]
    assert all(b >= a - 1e-9 for a, b in zip(logls, logls[1:]))
    for r in reports:
        assert r.bic == r.k * math.log(r.n) - 2 * r.log_likelihood

    elapsed = time.time() - start_time
    assert elapsed < 120.0, f"econometrics checks took {elapsed:.1f}s"


# --- 8: metric oracle ---------------------------------------------------------------------


@criterion(8, "macro precision/recall match a brute-force per-class loop on "
              "1000 random cases")
def test_c08_metric_oracle():
    rng = np.random.default_rng(808)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        truth = rng.integers(0, 2, size=n)
        pred = rng.integers(0, 2, size=n)
        ev = evaluate(pred, truth)
        precisions, recalls = [], []
        for c in sorted(set(truth.tolist())):
            tp = sum(1 for a, b in zip(pred, truth) if a == c and b == c)
            predicted = sum(1 for a in pred if a == c)
            actual = sum(1 for b in truth if b == c)
            precisions.append(tp / predicted if predicted else 0.0)
            recalls.append(tp / actual if actual else 0.0)
        assert ev.accuracy == sum(1 for a, b in zip(pred, truth) if a == b) / n
        assert ev.macro_precision == float(np.mean(precisions))
        assert ev.macro_recall == float(np.mean(recalls))


# --- 9: determinism -------------------------------------------------------------------------


@criterion(9, "two identically configured pipeline runs produce byte-identical "
              "tables and checkpoints")
def test_c09_determinism():
    from click.testing import CliRunner

    from ecpipe.cli import main

    runner = CliRunner()
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        records, prices, _ = planted_corpus(50, seed=3)
        spec = write_inputs(tmp_path, records, prices)
        config = {
            "inputs": spec,
            "experiment": {
                "label": {"kind": "value"},
                "method": "StockGNN",
                "sectors": ["Tech"],
                "seeds": [0],
                "min_examples": 5,
                "embed": {"dims": [8], "epochs": 4, "window": 3, "lr": 0.1,
                          "min_count": 1, "infer_steps": 4},
                "gnn": {"feature_dim": 8, "graph_dim": 8, "head_hidden": 8,
                        "lr": 0.3, "epochs": 4, "val_fraction": 0.0},
                "head": {"lr": 0.5, "epochs": 50, "hidden": 8},
                "save_checkpoints": True,
            },
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))

        outputs = []
        for run in ("a", "b"):
            out = tmp_path / f"out_{run}"
            result = runner.invoke(main, ["evaluate", "--config", str(config_path),
                                          "--out-dir", str(out)])
            assert result.exit_code == 0, result.output
            slot = next(p for p in out.iterdir() if p.is_dir())
            outputs.append(slot)

        first, second = outputs
        for name in ("result.csv", "result.txt", "config.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
        ckpt_a = sorted((first / "checkpoints").iterdir())
        ckpt_b = sorted((second / "checkpoints").iterdir())
        assert [p.name for p in ckpt_a] == [p.name for p in ckpt_b]
        assert len(ckpt_a) > 0
        for pa, pb in zip(ckpt_a, ckpt_b):
            assert pa.read_bytes() == pb.read_bytes(), pa.name


# --- 10: config fidelity ----------------------------------------------------------------------


@criterion(10, "shipped defaults carry the documented experimental settings")
def test_c10_config_fidelity():
    import inspect

    from ecpipe.classifiers import HeadConfig, default_mlp_hidden
    from ecpipe.docembed import PvdmConfig, build_vocab

    assert defaults.SBL_TAU == 0.05
    assert defaults.GRAPH_WINDOW == 3
    assert defaults.GNN_HOPS == 2
    assert defaults.BATCH_SIZE == 128
    assert defaults.DOCEMBED_LR == 0.001
    assert defaults.DOCEMBED_NEGATIVES == 5
    assert defaults.DOCEMBED_MIN_COUNT == 2
    assert defaults.GRAPH_EMBEDDING_DIM == 96
    assert defaults.NODE_FEATURE_DIM == 300
    assert defaults.DOCEMBED_DIMS == (100, 200, 300)
    assert defaults.MLP_HIDDEN_BY_DIM == {100: 32, 200: 64, 300: 128}
    assert defaults.SE_MLP_HIDDEN == 16
    assert defaults.TRAIN_MAX_YEAR == 2018 and defaults.TEST_YEAR == 2019
    assert defaults.MIN_SEEDS == 10

    # the defaults are actually wired through, not merely declared
    assert LabelSpec("shock").tau == 0.05
    assert inspect.signature(build_text_graph).parameters["window"].default == 3
    assert inspect.signature(run_gnn).parameters["k"].default == 2
    assert TrainConfig().batch_size == 128
    assert HeadConfig().batch_size == 128
    pvdm = PvdmConfig(dim=100)
    assert pvdm.lr == 0.001 and pvdm.negatives == 5
    assert inspect.signature(build_vocab).parameters["min_count"].default == 2
    model = StockGnnModel.init(4, seed=0)
    assert model.aggregator.out_dim == 96
    assert model.hops == 2
    assert default_mlp_hidden(100, "transcript-embedding") == 32
    assert default_mlp_hidden(200, "transcript-embedding") == 64
    assert default_mlp_hidden(300, "transcript-embedding") == 128
    assert default_mlp_hidden(4, "SE") == 16
    assert ExperimentConfig(label=LabelSpec("value"), method="DEmlp").embed.dims \
        == (100, 200, 300)


# --- 11: recommendation windows -----------------------------------------------------------------


@criterion(11, "the worked majority example returns hold and out-of-window "
               "records are inert over 500 cases")
def test_c11_mar():
    call = D(2015, 9, 20)
    rows = [RecommendationRecord("ACME", D(2015, 8, 21 + i), "hold") for i in range(6)]
    rows += [RecommendationRecord("ACME", D(2015, 9, 2 + i), "moderate_buy")
             for i in range(4)]
    assert compute_mar(rows, "ACME", call, PRIOR_1M) == "hold"

    rng = np.random.default_rng(1111)
    for _ in range(500):
        call = D(2017, int(rng.integers(1, 13)), int(rng.integers(1, 28)))
        in_window = [
            RecommendationRecord("T", call - dt.timedelta(days=int(rng.integers(1, 28))),
                                 RATINGS[int(rng.integers(len(RATINGS)))])
            for _ in range(int(rng.integers(0, 8)))
        ]
        noise = []
        for _ in range(int(rng.integers(0, 12))):
            offset = int(rng.integers(32, 500))
            day = call - dt.timedelta(days=offset) if rng.random() < 0.5 \
                else call + dt.timedelta(days=offset)
            noise.append(RecommendationRecord(
                "T", day, RATINGS[int(rng.integers(len(RATINGS)))]))
            noise.append(RecommendationRecord(
                "OTHER", call - dt.timedelta(days=5),
                RATINGS[int(rng.integers(len(RATINGS)))]))
        clean = compute_mar(in_window, "T", call, PRIOR_1M)
        noisy = compute_mar(in_window + noise, "T", call, PRIOR_1M)
        assert clean == noisy
