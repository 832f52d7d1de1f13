"""Frame selection, evaluation table, corpus helpers, and the CLI."""

import numpy as np
import pytest

from framepick import features, mlp, pipeline, quality, rfsim
from framepick.pipeline import cli


def constant_model(n_in, prob_shift):
    """Model whose output is independent of the input: softmax([s, -s])."""
    model = mlp.init_model(0, (n_in, 4, 2))
    for w in model.weights:
        w[:] = 0.0
    for b in model.biases:
        b[:] = 0.0
    model.biases[-1][:] = [-prob_shift, prob_shift]
    return model


def test_select_pair_tie_breaking(basis_small, seq_small):
    frames, _ = seq_small
    # equal probabilities everywhere: smaller |offset| wins, negative side first
    model = constant_model(12, 0.0)
    sel = pipeline.select_pair(frames, 6, basis_small, model)
    assert sel.chosen_partner == 5
    assert sel.prob_good == pytest.approx(0.5)
    assert not sel.none_found  # 0.5 is not below the threshold
    assert len(sel.candidates) == 11  # +-8 window clipped to the 12-frame sequence
    assert {j for j, _ in sel.candidates} == {6 + o for o in range(-8, 9) if o != 0 and 0 <= 6 + o < 12}


def test_select_pair_none_found(basis_small, seq_small):
    frames, _ = seq_small
    model = constant_model(12, -3.0)  # prob_good ~ 0.002 for every pair
    sel = pipeline.select_pair(frames, 0, basis_small, model)
    assert sel.none_found
    assert sel.chosen_partner == 1  # argmax still reported, ties resolve to -1 side first
    assert len(sel.candidates) == 8  # clipped at the sequence start


def test_select_pair_validates_inputs(basis_small, seq_small):
    frames, _ = seq_small
    model = constant_model(12, 0.0)
    with pytest.raises(ValueError):
        pipeline.select_pair(frames, 12, basis_small, model)
    with pytest.raises(ValueError):
        pipeline.select_pair(frames, 0, basis_small, model, window=3)
    with pytest.raises(ValueError):
        pipeline.select_pair(frames[:1], 0, basis_small, model)


def test_select_pair_score_cache(basis_small, seq_small, monkeypatch):
    frames, _ = seq_small
    model = constant_model(12, 0.0)
    calls = []
    orig = features.extract_features

    def counting(*args, **kwargs):
        calls.append(kwargs.get("pair_ids"))
        return orig(*args, **kwargs)

    monkeypatch.setattr(features, "extract_features", counting)
    scores = {}
    s1 = pipeline.select_pair(frames, 5, basis_small, model, scores=scores)
    n_first = len(calls)
    s2 = pipeline.select_pair(frames, 5, basis_small, model, scores=scores)
    assert len(calls) == n_first  # second pass fully cached
    assert s1 == s2


def test_classifier_input_widths(basis_small, seq_small):
    frames, _ = seq_small
    fv = features.extract_features(frames[0], frames[1], basis_small)
    m12 = constant_model(12, 0.0)
    m13 = constant_model(13, 0.0)
    assert pipeline.classifier_input(fv, m12).shape == (12,)
    x13 = pipeline.classifier_input(fv, m13)
    assert x13.shape == (13,) and x13[-1] == fv.residual_rms
    with pytest.raises(ValueError):
        pipeline.classifier_input(fv, constant_model(7, 0.0))


def test_eval_table_summary():
    rows = [
        (0, 1, "selected", 2.0, 1.0),
        (1, 2, "selected", 4.0, 3.0),
        (0, 1, "skip1", 1.0, 0.5),
    ]
    table = pipeline.EvalTable(rows, [])
    assert table.methods() == ["selected", "skip1"]
    assert np.array_equal(table.values("selected", "snr"), [2.0, 4.0])
    summ = table.summary()
    assert summ["selected"]["count"] == 2
    assert summ["selected"]["snr_mean"] == 3.0
    assert summ["selected"]["snr_std"] == pytest.approx(np.std([2.0, 4.0], ddof=1))
    assert np.isnan(summ["skip1"]["snr_std"])  # single row
    assert table.values("skip9", "cnr").size == 0


def test_evaluate_sequence_row_structure(basis_small, seq_small):
    frames, truth = seq_small
    model = constant_model(12, 3.0)  # every pair scores ~0.998: no abstention
    table = pipeline.evaluate_sequence(frames, truth, basis_small, model, strain_window=21, skips=(1, 2))
    methods = table.methods()
    assert set(methods) == {"selected", "skip1", "skip2"}
    assert len(table.values("skip1", "snr")) == 11
    assert len(table.values("skip2", "snr")) == 10
    assert len(table.values("selected", "snr")) == 12
    assert len(table.selections) == 12
    for sel in table.selections:
        assert not sel.none_found


def test_evaluate_sequence_abstains(basis_small, seq_small):
    frames, truth = seq_small
    model = constant_model(12, -3.0)  # every pair rejected
    table = pipeline.evaluate_sequence(frames, truth, basis_small, model, strain_window=21, skips=(1,))
    assert len(table.values("selected", "snr")) == 0
    assert all(sel.none_found for sel in table.selections)
    kept = pipeline.evaluate_sequence(
        frames, truth, basis_small, model, strain_window=21, skips=(1,), include_none_found=True
    )
    assert len(kept.values("selected", "snr")) == 12


def test_evaluate_sequence_validation(basis_small, seq_small):
    frames, truth = seq_small
    model = constant_model(12, 0.0)
    with pytest.raises(ValueError):
        pipeline.evaluate_sequence(frames[:6], truth, basis_small, model)
    with pytest.raises(ValueError):
        pipeline.evaluate_sequence(frames, truth, basis_small, model, skips=(0,))
    with pytest.raises(ValueError):
        pipeline.evaluate_sequence(frames, truth, basis_small, model, skips=(12,))


def test_evaluate_sequence_explicit_windows(basis_small, seq_small):
    frames, truth = seq_small
    model = constant_model(12, 3.0)
    wins = ((10, 30, 4, 14), (10, 30, 30, 40))
    t1 = pipeline.evaluate_sequence(frames, truth, basis_small, model, strain_window=21, skips=(1,), windows=wins)
    t2 = pipeline.evaluate_sequence(frames, None, basis_small, model, strain_window=21, skips=(1,), windows=wins)
    assert t1.rows == t2.rows


def test_truth_label_map_and_join(seq_small, basis_small):
    frames, truth = seq_small
    labels = pipeline.truth_label_map(truth)
    assert labels[(0, 1)] == truth.pair(0, 1).label
    rows = features.extract_features_batch(frames, [(0, 1), (2, 3)], basis_small)
    x, y = pipeline.join_features_labels(rows, labels)
    assert x.shape == (2, 12) and y.shape == (2,)
    xr, _ = pipeline.join_features_labels(rows, labels, use_residual=True)
    assert xr.shape == (2, 13)
    assert np.array_equal(xr[:, :12], x)
    with pytest.raises(ValueError):
        pipeline.join_features_labels(
            [features.FeatureVector(np.zeros(12), 0.0, (99, 98))], labels
        )


def test_balance_dataset_counts_and_determinism():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((100, 3))
    y = np.array([0] * 80 + [1] * 20)
    x1, y1 = pipeline.balance_dataset(x, y, seed=6)
    x2, y2 = pipeline.balance_dataset(x, y, seed=6)
    assert (y1 == 0).sum() == (y1 == 1).sum() == 20
    assert np.array_equal(x1, x2) and np.array_equal(y1, y2)
    with pytest.raises(ValueError):
        pipeline.balance_dataset(x, np.zeros(100, dtype=int))


def test_train_scaled_scores_raw_features():
    rng = np.random.default_rng(1)
    # one informative column living at a tiny scale next to a noise column
    n = 400
    y = rng.integers(0, 2, size=n)
    x = np.column_stack([rng.standard_normal(n) * 300.0, (y * 2.0 - 1.0) * 0.01 + rng.standard_normal(n) * 0.002])
    cfg = mlp.TrainConfig(epochs=30, seed=2, layer_dims=(2, 8, 2))
    model, hist = pipeline.train_scaled(x, y, cfg)
    assert hist.best_val_accuracy >= 0.95
    assert mlp.accuracy(model, x, y) >= 0.95  # folded model takes unscaled inputs


def test_train_scaled_handles_constant_column():
    rng = np.random.default_rng(3)
    n = 200
    y = rng.integers(0, 2, size=n)
    x = np.column_stack([np.full(n, 5.0), (y * 2.0 - 1.0) + rng.standard_normal(n) * 0.1])
    model, hist = pipeline.train_scaled(x, y, mlp.TrainConfig(epochs=120, seed=4, layer_dims=(2, 6, 2)))
    assert hist.best_val_accuracy >= 0.95
    assert np.all(np.isfinite(model.weights[0]))


def test_build_classifier_dataset_small(basis_small):
    x, y = pipeline.build_classifier_dataset(
        17, basis_small, min_per_class=12, max_sequences=6, n_frames=10, use_residual=True
    )
    assert x.shape[1] == 13
    assert (y == 1).sum() >= 12 and (y == 0).sum() >= 12


# ---------------------------------------------------------------------------
# CLI

def run_cli(args):
    return cli([str(a) for a in args])


def test_cli_full_chain(tmp_path, jit_warm):
    d = tmp_path
    assert run_cli(["simulate", "--seed", 5, "--frames", 10, "--m", 128, "--l", 40,
                    "--preset", "mixed", "--out", d / "s.rfb", "--truth", d / "t.csv"]) == 0
    assert run_cli(["train-pca", "--seed", 6, "--fields", 40, "--m", 128, "--l", 40,
                    "--grid", "32x20", "--components", 8, "--out", d / "b.pcb"]) == 0
    assert run_cli(["extract-features", "--rfb", d / "s.rfb", "--basis", d / "b.pcb",
                    "--dmax", 20, "--out", d / "f.csv"]) == 0
    assert run_cli(["train-mlp", "--features", d / "f.csv", "--truth", d / "t.csv",
                    "--epochs", 25, "--seed", 7, "--use-residual", "--out", d / "m.mlp"]) == 0
    assert run_cli(["select", "--rfb", d / "s.rfb", "--basis", d / "b.pcb", "--model", d / "m.mlp",
                    "--ref", 4, "--dmax", 20, "--out", d / "sel.txt"]) == 0
    line = (d / "sel.txt").read_text()
    assert line.startswith("ref=4 partner=") and "prob_good=" in line and "none_found=" in line
    assert run_cli(["evaluate", "--rfb", d / "s.rfb", "--basis", d / "b.pcb", "--model", d / "m.mlp",
                    "--dmax", 20, "--strain-window", 21, "--out", d / "e.csv"]) == 0
    rows = quality.read_metrics_csv(d / "e.csv")
    assert {r[2] for r in rows} >= {"skip1", "skip2", "skip3"}


def test_cli_determinism_byte_identical(tmp_path, jit_warm):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        run_cli(["simulate", "--seed", 9, "--frames", 10, "--m", 128, "--l", 40,
                 "--out", d / "s.rfb", "--truth", d / "t.csv"])
        run_cli(["train-pca", "--seed", 2, "--fields", 30, "--m", 128, "--l", 40,
                 "--grid", "32,20", "--components", 6, "--out", d / "b.pcb"])
        outs.append(d)
    for name in ("s.rfb", "t.csv", "b.pcb"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_config_precedence(tmp_path, jit_warm):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("frames=9\nm=128\nl=40\npreset=steady\n# comment line\n\n")
    out = tmp_path / "s.rfb"
    assert run_cli(["simulate", "--config", cfg, "--seed", 1, "--frames", 11,
                    "--out", out, "--truth", tmp_path / "t.csv"]) == 0
    data, _, _ = rfsim.read_rfb(out)
    assert data.shape == (11, 128, 40)  # flag beats config; config beats default


def test_cli_error_paths(tmp_path, capsys):
    assert run_cli(["simulate", "--bogus"]) == 1
    assert run_cli(["no-such-command"]) == 1
    assert run_cli(["extract-features", "--rfb", "/does/not/exist.rfb",
                    "--basis", "/does/not/exist.pcb", "--out", tmp_path / "x.csv"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("unknown_key=1\n")
    assert run_cli(["simulate", "--config", bad, "--out", tmp_path / "y.rfb",
                    "--truth", tmp_path / "y.csv"]) == 2
    err = capsys.readouterr().err
    assert "usage error" in err and "error:" in err


def test_cli_select_requires_arguments():
    assert run_cli(["select"]) == 1  # missing --rfb/--basis/--model is a usage error
