"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
report. The two dataset-bound criteria (7 and 8) need the public benchmark
CSVs; point XPATCH_DATA_DIR at the directory holding ETTh1.csv and
national_illness.csv (or place them under ./data). Without the files those
tests skip and every other criterion still runs.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import gradcheck, rel_error
from xpatch.adf import chunked_adf
from xpatch.autograd import Tensor, backward, concat
from xpatch.cli import main as cli_main
from xpatch.datasets import (
    PRESETS,
    Scaler,
    load_csv,
    make_sine_dataset,
    split,
    split_spec_for,
)
from xpatch.decompose import ema_closed_form, ema_recursive, sma
from xpatch.evaluation import evaluate
from xpatch.losses import (
    LossSpec,
    loss_mae,
    loss_mse,
    loss_scalable,
    rho_arctan,
    rho_card,
)
from xpatch.model import ModelConfig, PatchConfig, XPatchModel
from xpatch.ops import (
    BatchNormState,
    avg_pool1d,
    batch_norm,
    gelu,
    grouped_conv1d,
    layer_norm,
    linear,
    replicate_last,
    unfold_last,
)
from xpatch.schedules import SchedulerSpec, lr_sigmoid
from xpatch.training import TrainConfig, fit

N_SEEDS = 20


def report(criterion: int, text: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS - {text}")


def find_dataset(filename: str) -> Path | None:
    candidates = []
    if "XPATCH_DATA_DIR" in os.environ:
        candidates.append(Path(os.environ["XPATCH_DATA_DIR"]) / filename)
    candidates.append(Path("data") / filename)
    candidates.append(Path(__file__).parent / "data" / filename)
    for path in candidates:
        if path.exists():
            return path
    return None


def test_criterion_1_ema_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(0)
    alphas = (0.1, 0.3, 0.5, 0.7, 0.9)
    worst = 0.0
    for case in range(100):
        x = rng.standard_normal(720)
        alpha = alphas[case % 5]
        closed = ema_closed_form(x, alpha)
        recursive = ema_recursive(x, alpha)
        worst = max(worst, float(np.abs(closed.trend - recursive.trend).max()))
    elapsed = time.monotonic() - start
    assert worst < 1e-9, f"max abs diff {worst:.3e}"
    assert elapsed < 5.0, f"runtime {elapsed:.2f}s exceeds 5s"
    report(1, f"closed-form vs recursive max diff {worst:.2e} in {elapsed:.2f}s")


def test_criterion_2_gradient_suite():
    start = time.monotonic()
    h, tol = 1e-5, 1e-4
    for seed in range(N_SEEDS):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        b = Tensor(rng.standard_normal(5), requires_grad=True)
        gradcheck(linear, (x, w, b), h=h, tol=tol, seed=seed)

        xp = Tensor(rng.standard_normal((2, 8)), requires_grad=True)
        gradcheck(lambda t: avg_pool1d(t, 2, 2), (xp,), h=h, tol=tol, seed=seed)
        gradcheck(lambda t: unfold_last(replicate_last(t, 2), 4, 2), (xp,),
                  h=h, tol=tol, seed=seed)
        gradcheck(gelu, (xp,), h=h, tol=tol, seed=seed)

        g = Tensor(rng.standard_normal(8), requires_grad=True)
        bb = Tensor(rng.standard_normal(8), requires_grad=True)
        gradcheck(lambda t, gg, bbb: layer_norm(t, gg, bbb), (xp, g, bb),
                  h=h, tol=tol, seed=seed)

        xb = Tensor(rng.standard_normal((3, 2, 4)), requires_grad=True)
        gb = Tensor(rng.standard_normal(2), requires_grad=True)
        bbt = Tensor(rng.standard_normal(2), requires_grad=True)
        gradcheck(
            lambda a, c, d: batch_norm(a, c, d, BatchNormState(2), training=True),
            (xb, gb, bbt), h=h, tol=tol, seed=seed,
        )

        xc = Tensor(rng.standard_normal((2, 4, 6)), requires_grad=True)
        wc = Tensor(rng.standard_normal((4, 2, 2)), requires_grad=True)
        bc = Tensor(rng.standard_normal(4), requires_grad=True)
        gradcheck(lambda a, c, d: grouped_conv1d(a, c, d, stride=2, groups=2),
                  (xc, wc, bc), h=h, tol=tol, seed=seed)

        ca = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        cb = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
        gradcheck(lambda a, c: concat([a, c], axis=1), (ca, cb), h=h, tol=tol, seed=seed)

    lin_cfg = ModelConfig(lookback=8, horizon=4, n_channels=1, patch_len=4, stride=4)
    nl_cfg = ModelConfig(lookback=8, horizon=4, n_channels=1, patch_len=4, stride=4)
    for seed in range(N_SEEDS):
        rng = np.random.default_rng(100 + seed)
        model = XPatchModel(lin_cfg, seed=seed)
        x = rng.standard_normal((2, 8))
        _check_stream(model, [n for n in model.params.tensors if n.startswith("lin_")],
                      lambda m=model, x=x: m.linear_stream(Tensor(x)), h, tol)
        model2 = XPatchModel(nl_cfg, seed=seed)
        _check_stream(model2, [n for n in model2.params.tensors if n.startswith("nl_")],
                      lambda m=model2, x=x: m.nonlinear_stream(Tensor(x), training=True),
                      h, tol)
    elapsed = time.monotonic() - start
    assert elapsed < 120.0, f"runtime {elapsed:.1f}s exceeds 2 min"
    report(2, f"all ops and both streams pass FD checks over {N_SEEDS} seeds "
              f"in {elapsed:.1f}s")


def _check_stream(model, names, run, h, tol):
    out = run()
    proj = np.random.default_rng(0).standard_normal(out.shape)
    model.params.zero_grads()
    backward((out * Tensor(proj)).sum())
    for name in names:
        tensor = model.params[name]
        assert tensor.grad is not None, f"{name} received no gradient"
        flat = tensor.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = float((run().data * proj).sum())
            flat[j] = orig - h
            down = float((run().data * proj).sum())
            flat[j] = orig
            numeric[j] = (up - down) / (2.0 * h)
        err = rel_error(tensor.grad.reshape(-1), numeric)
        assert err < tol, f"{name}: rel error {err:.3e}"


def test_criterion_3_loss_constants():
    assert rho_arctan(1) == 1.0
    assert rho_arctan(720) == pytest.approx(0.2159, abs=1e-3)
    assert rho_card(720) == pytest.approx(0.0373, abs=1e-3)
    report(3, "rho_arctan(1)=1 exact, rho_arctan(720)=0.2160, rho_card(720)=0.0373 "
              "(dominance clause tracked separately)")


@pytest.mark.xfail(
    strict=True,
    reason="inconsistent target as stated: with the published formulas "
    "(anchored by the 0.216 and 0.037 constants above) the arctangent "
    "coefficient is BELOW the inverse-square-root one for steps 2..10 and "
    "crosses at step 11. The steeper initial arctangent curve is a "
    "documented property of the function; full dominance from step 2 "
    "would require a scaling parameter below ~0.45, contradicting the "
    "pinned step-720 constants.",
)
def test_criterion_3_dominance_clause_as_written():
    steps = np.arange(2, 721)
    assert np.all(rho_arctan(steps) > rho_card(steps))


def test_criterion_3_dominance_from_crossover():
    steps = np.arange(11, 721)
    assert np.all(rho_arctan(steps) > rho_card(steps))
    report(3, "tail dominance holds from step 11 through 720 (steps 2..10 "
              "cannot dominate under the published constants; see xfail)")


def test_criterion_4_schedulers():
    alpha0 = 1e-4
    assert lr_sigmoid(0, alpha0, 0.5, 10.0, 10.0) == 0.0
    value10 = lr_sigmoid(10, alpha0, 0.5, 10.0, 10.0)
    assert value10 == pytest.approx(4.890e-5, abs=1e-8)

    values = np.array([lr_sigmoid(t, alpha0, 0.5, 10.0, 10.0) for t in range(101)])
    diffs = np.diff(values)
    signs = np.sign(diffs[diffs != 0.0])
    assert np.count_nonzero(np.diff(signs) != 0) == 1, "sigmoid not unimodal"

    closed = {
        "standard": lambda t: alpha0 * 0.5 ** (t - 1),
        "patch_tst": lambda t: alpha0 if t < 3 else alpha0 * 0.9 ** (t - 3),
        "cosine_warmup": lambda t: (
            alpha0 * t / 10 if t < 10
            else 0.5 * alpha0 * (1 + np.cos(np.pi * (t - 10) / 90))
        ),
        "sigmoid": lambda t: (
            alpha0 / (1 + np.exp(-0.5 * (t - 10)))
            - alpha0 / (1 + np.exp(-0.05 * (t - 100)))
        ),
    }
    for kind, formula in closed.items():
        spec = SchedulerSpec(kind=kind, alpha0=alpha0)
        for epoch in range(1, 101):
            assert spec.rate(epoch) == pytest.approx(formula(epoch), rel=1e-12), (
                kind, epoch,
            )
    report(4, "sigmoid(0)=0 exact, sigmoid(10)=4.890e-5, unimodal; all four "
              "schedules match closed forms at epochs 1..100")


def test_criterion_5_shapes_and_gradient_flow():
    for lookback, expected in ((36, 4), (96, 12), (192, 24), (336, 42),
                               (512, 64), (720, 90)):
        assert PatchConfig(16, 8).n_patches(lookback) == expected
    cfg = ModelConfig(lookback=96, horizon=96, n_channels=7)
    model = XPatchModel(cfg, seed=0)
    rng = np.random.default_rng(0)
    rows = 2 * 7
    out = model.forward(rng.standard_normal((rows, 96)), training=True)
    assert out.shape == (rows, 96)
    backward(loss_mse(out, Tensor(rng.standard_normal((rows, 96)))))
    dead = [n for n, t in model.params.items() if t.grad is None]
    assert not dead, f"dead parameters: {dead}"
    report(5, "patch-count formula holds on the L grid; forward is (R,T); "
              "every parameter receives a gradient")


def test_criterion_6_revin_roundtrip():
    rng = np.random.default_rng(3)
    cfg = ModelConfig(lookback=96, horizon=8, n_channels=4)
    model = XPatchModel(cfg, seed=1)
    model.params["revin_gamma"].data = rng.uniform(0.5, 1.5, 4)
    model.params["revin_beta"].data = rng.uniform(-0.5, 0.5, 4)
    worst = 0.0
    for _ in range(20):
        x = Tensor(rng.standard_normal((12, 96)) * rng.uniform(0.5, 4.0) + 2.0)
        normalized, state = model.revin_normalize(x)
        back = model.revin_denormalize(normalized, state)
        worst = max(worst, float(np.abs(back.data - x.data).max()))
    assert worst < 1e-6
    report(6, f"denormalize(normalize(x)) == x within {worst:.2e} (<1e-6)")


def _train_and_score(csv_path: Path, preset_name: str, lookback: int, horizon: int,
                     epochs: int = 100):
    ds = load_csv(csv_path, name=preset_name)
    preset = PRESETS[preset_name]
    cfg = TrainConfig(
        lookback=lookback, horizon=horizon, alpha=0.3,
        batch_size=32, epochs=epochs, seed=0, patience=10,
        loss=LossSpec(kind="arctan"),
        scheduler=SchedulerSpec(kind="sigmoid", alpha0=1e-4),
    )
    views = split(ds, split_spec_for(preset, ds.n_rows), cfg.lookback)
    scaler = Scaler().fit(views.train, ds.column_names)
    model = XPatchModel(cfg.model_config(ds.n_channels), seed=cfg.seed)
    result = fit(model, scaler.transform(views.train), scaler.transform(views.val), cfg)
    test_report = evaluate(
        model, scaler.transform(views.test), cfg.lookback, cfg.horizon,
        dataset=preset_name,
    )
    return result, test_report


def test_criterion_7_desk_scale_reproduction():
    etth1 = find_dataset("ETTh1.csv")
    ili = find_dataset("national_illness.csv")
    if etth1 is None or ili is None:
        pytest.skip(
            "benchmark CSVs not available in this environment (no download "
            "path); place ETTh1.csv and national_illness.csv under "
            "$XPATCH_DATA_DIR or ./data to run the desk-scale reproduction"
        )
    start = time.monotonic()
    _, etth1_report = _train_and_score(etth1, "etth1", 96, 96)
    assert etth1_report.mse <= 0.42, f"ETTh1 MSE {etth1_report.mse:.4f} > 0.42"
    assert etth1_report.mae <= 0.43, f"ETTh1 MAE {etth1_report.mae:.4f} > 0.43"
    _, ili_report = _train_and_score(ili, "ili", 36, 24)
    assert ili_report.mse <= 1.8, f"ILI MSE {ili_report.mse:.4f} > 1.8"
    elapsed = time.monotonic() - start
    report(7, f"ETTh1 96/96 mse={etth1_report.mse:.3f} mae={etth1_report.mae:.3f}; "
              f"ILI 36/24 mse={ili_report.mse:.3f}; {elapsed/60:.1f} min")


def test_criterion_7_harness_on_synthetic_data():
    """Same training harness, learnable synthetic stand-in.

    Verifies the full pipeline (split, scale, fit with the published
    defaults, evaluate) converges and beats the repeat-last-value
    baseline; the benchmark-number gate itself lives in the dataset-bound
    test above.
    """
    values = make_sine_dataset(1400, 3, noise=0.05, seed=0).values
    from xpatch.datasets import RawDataset, ratio_split_spec

    ds = RawDataset("synthetic", values, ("a", "b", "c"))
    cfg = TrainConfig(
        lookback=96, horizon=24, alpha=0.3, batch_size=32, epochs=40,
        seed=0, patience=10, loss=LossSpec(kind="arctan"),
        scheduler=SchedulerSpec(kind="sigmoid", alpha0=1e-3),
    )
    views = split(ds, ratio_split_spec(ds.n_rows), cfg.lookback)
    scaler = Scaler().fit(views.train)
    model = XPatchModel(cfg.model_config(3), seed=0)
    result = fit(model, scaler.transform(views.train), scaler.transform(views.val), cfg)
    test_view = scaler.transform(views.test)
    model_report = evaluate(model, test_view, cfg.lookback, cfg.horizon)

    def naive(rows):
        return np.repeat(rows[:, -1:], cfg.horizon, axis=1)

    naive_report = evaluate(None, test_view, cfg.lookback, cfg.horizon,
                            predict_fn=naive)
    assert model_report.mse < 0.5 * naive_report.mse, (
        model_report.mse, naive_report.mse,
    )
    assert result.history[-1].val_mse < result.history[0].val_mse
    report(7, f"harness smoke: synthetic mse {model_report.mse:.4f} vs naive "
              f"{naive_report.mse:.4f} (gate on real data skips without CSVs)")


def test_criterion_8_decomposition_directionality():
    etth1 = find_dataset("ETTh1.csv")
    if etth1 is None:
        pytest.skip(
            "ETTh1.csv not available in this environment; set XPATCH_DATA_DIR "
            "to run the decomposition stationarity gate"
        )
    ds = load_csv(etth1, name="etth1")
    table = chunked_adf(ds.values, chunk_len=720, alpha=0.3)
    mean_seasonal = table.mean_p("seasonal")
    mean_trend = table.mean_p("trend")
    assert mean_seasonal < mean_trend
    frac = table.stationary_count("seasonal") / table.total_chunks("seasonal")
    assert frac >= 0.9
    report(8, f"ETTh1 chunks: seasonal mean p {mean_seasonal:.4f} < trend "
              f"{mean_trend:.4f}; {frac:.0%} seasonal chunks stationary")


def test_criterion_8_directionality_on_synthetic_data():
    rng = np.random.default_rng(0)
    t = np.arange(2200.0)
    cols = []
    for c in range(3):
        walk = rng.standard_normal(2200).cumsum() * 0.25
        season = np.sin(2 * np.pi * t / 24.0 + c) + 0.1 * rng.standard_normal(2200)
        cols.append(walk + season)
    table = chunked_adf(np.stack(cols, axis=1), chunk_len=720, alpha=0.3)
    assert table.mean_p("seasonal") < table.mean_p("trend")
    frac = table.stationary_count("seasonal") / table.total_chunks("seasonal")
    assert frac >= 0.9
    report(8, f"synthetic directionality: seasonal mean p "
              f"{table.mean_p('seasonal'):.2e} < trend {table.mean_p('trend'):.3f}, "
              f"{frac:.0%} seasonal chunks stationary")


def test_criterion_9_training_determinism(tmp_path):
    values = make_sine_dataset(300, 2, seed=5).values
    csv_path = tmp_path / "series.csv"
    with csv_path.open("w") as fh:
        fh.write("a,b\n")
        for row in values:
            fh.write(f"{float(row[0])!r},{float(row[1])!r}\n")
    args = [
        "train", "--dataset", str(csv_path), "--lookback", "16", "--horizon", "8",
        "--patch-len", "4", "--stride", "4", "--epochs", "3", "--batch-size", "16",
        "--scheduler", "standard", "--lr", "0.005", "--loss", "mse", "--seed", "42",
    ]
    assert cli_main(args + ["--out-dir", str(tmp_path / "r1")]) == 0
    assert cli_main(args + ["--out-dir", str(tmp_path / "r2")]) == 0
    h1 = (tmp_path / "r1" / "history.csv").read_bytes()
    h2 = (tmp_path / "r2" / "history.csv").read_bytes()
    assert h1 == h2
    c1 = (tmp_path / "r1" / "checkpoint.bin").read_bytes()
    c2 = (tmp_path / "r2" / "checkpoint.bin").read_bytes()
    assert c1 == c2
    report(9, "two identical-seed CLI training runs emit bitwise-identical "
              "history CSVs and checkpoints")


def test_criterion_10_property_suite():
    rng = np.random.default_rng(7)
    alphas = (0.1, 0.3, 0.5, 0.7, 0.9)

    # decomposition reconstruction: bitwise in the defining direction,
    # one rounding of the trend magnitude in the additive direction
    for case in range(200):
        x = rng.standard_normal(96)
        pair = (
            ema_closed_form(x, alphas[case % 5])
            if case % 2
            else sma(x, 2 * (case % 6) + 1)
        )
        assert np.array_equal(x - pair.trend, pair.seasonal)
        scale = np.maximum(np.abs(x), np.abs(pair.trend))
        assert np.all(np.abs(pair.trend + pair.seasonal - x) <= 2.0**-52 * scale)

    for case in range(200):
        x = rng.standard_normal(120)
        alpha = alphas[case % 5]
        shift = float(rng.uniform(-10, 10))
        scale = float(rng.uniform(0.1, 20.0))
        base = ema_closed_form(x, alpha)
        assert np.abs(ema_closed_form(x + shift, alpha).trend
                      - (base.trend + shift)).max() < 1e-9
        tol = 1e-9 * abs(scale) * max(np.abs(x).max(), 1.0)
        assert np.abs(ema_closed_form(scale * x, alpha).trend
                      - scale * base.trend).max() < tol

    for case in range(200):
        pred = Tensor(rng.standard_normal((4, 6)))
        target = Tensor(rng.standard_normal((4, 6)))
        assert loss_scalable(pred, target, np.ones(6)).item() == \
            loss_mae(pred, target).item()

    model = XPatchModel(
        ModelConfig(lookback=16, horizon=8, n_channels=2, patch_len=4, stride=4),
        seed=0,
    )
    for case in range(200):
        view = rng.standard_normal((40, 2))
        rep = evaluate(model, view, 16, 8)
        assert rep.mae <= np.sqrt(rep.mse)
    report(10, "reconstruction, shift/scale equivariance, rho=1 MAE identity, "
               "and mae<=sqrt(mse) hold over 200 randomized cases each")
