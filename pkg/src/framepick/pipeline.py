"""Frame-pair selection over a sliding window, sequence evaluation against
fixed-skip baselines, and the command-line interface."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import dptrack, features, mlp, pcabasis, quality, rfsim

DEFAULT_PAIR_WINDOW = 16


@dataclass(frozen=True)
class SelectionResult:
    ref_frame: int
    chosen_partner: int
    prob_good: float
    candidates: list[tuple[int, float]]
    none_found: bool


def train_scaled(x: np.ndarray, y: np.ndarray, config: mlp.TrainConfig) -> tuple[mlp.MlpModel, mlp.TrainHistory]:
    """Train on per-column standardized features, then fold the affine
    transform into the first layer so the returned model scores raw features.

    Column scales differ by orders of magnitude (leading basis weights vs
    the residual), which starves small columns under a shared learning rate.
    """
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    model, history = mlp.train(((x - mu) / sd, y), config)
    w0 = model.weights[0] / sd[:, None]
    b0 = model.biases[0] - mu @ w0
    folded = mlp.MlpModel(
        [w0] + [w.copy() for w in model.weights[1:]],
        [b0] + [b.copy() for b in model.biases[1:]],
    )
    return folded, history


def classifier_input(fv: features.FeatureVector, model: mlp.MlpModel) -> np.ndarray:
    """Feature vector shaped to the model's input width.

    A model one input wider than the weight vector takes the LSQ residual
    as its last input.
    """
    n_in = model.weights[0].shape[0]
    if n_in == fv.w.size:
        return fv.w
    if n_in == fv.w.size + 1:
        return np.append(fv.w, fv.residual_rms)
    raise ValueError(f"model expects {n_in} inputs but features provide {fv.w.size} weights")


def _score_pair(sequence, i, j, basis, model, p, dp_params, scores):
    if scores is not None and (i, j) in scores:
        return scores[(i, j)]
    fv = features.extract_features(sequence[i], sequence[j], basis, p=p, dp_params=dp_params, pair_ids=(i, j))
    prob = mlp.predict(model, classifier_input(fv, model)).prob_good
    if scores is not None:
        scores[(i, j)] = prob
    return prob


def select_pair(
    sequence,
    ref_idx: int,
    basis: pcabasis.PcaBasis,
    model: mlp.MlpModel,
    window: int = DEFAULT_PAIR_WINDOW,
    p: int = 5,
    dp_params: dptrack.DpParams | None = None,
    scores: dict | None = None,
) -> SelectionResult:
    """Choose the best partner for one reference frame.

    Candidates are the frames at offsets +-1..window/2, clipped to the
    sequence. The partner maximizing prob_good wins; ties prefer the smaller
    |offset|, then the negative offset. none_found is set when no candidate
    reaches 0.5 (the argmax is still reported).
    """
    n = len(sequence)
    if n < 2:
        raise ValueError("need at least 2 frames")
    if not 0 <= ref_idx < n:
        raise ValueError(f"ref_idx {ref_idx} out of range for {n} frames")
    if window < 2 or window % 2 != 0:
        raise ValueError(f"window must be even and >= 2, got {window}")
    half = window // 2
    candidates = []
    best = None
    for j in range(max(0, ref_idx - half), min(n, ref_idx + half + 1)):
        if j == ref_idx:
            continue
        prob = _score_pair(sequence, ref_idx, j, basis, model, p, dp_params, scores)
        candidates.append((j, prob))
        key = (-prob, abs(j - ref_idx), 0 if j < ref_idx else 1)
        if best is None or key < best[0]:
            best = (key, j, prob)
    return SelectionResult(
        ref_frame=ref_idx,
        chosen_partner=best[1],
        prob_good=best[2],
        candidates=candidates,
        none_found=all(prob < 0.5 for _, prob in candidates),
    )


@dataclass
class EvalTable:
    """Per-pair SNR/CNR rows for each pairing method, plus the selections."""

    rows: list[tuple[int, int, str, float, float]]
    selections: list[SelectionResult]

    def methods(self) -> list[str]:
        seen = dict.fromkeys(method for _, _, method, _, _ in self.rows)
        return list(seen)

    def values(self, method: str, column: str) -> np.ndarray:
        idx = {"snr": 3, "cnr": 4}[column]
        return np.array([row[idx] for row in self.rows if row[2] == method])

    def summary(self) -> dict[str, dict[str, float]]:
        """Per-method count and mean/std (ddof=1); empty methods get nan stats."""
        out = {}
        for method in self.methods():
            s = self.values(method, "snr")
            c = self.values(method, "cnr")
            if s.size >= 2:
                stats = (s.mean(), s.std(ddof=1), c.mean(), c.std(ddof=1))
            elif s.size == 1:
                stats = (s[0], np.nan, c[0], np.nan)
            else:
                stats = (np.nan, np.nan, np.nan, np.nan)
            out[method] = {
                "count": s.size,
                "snr_mean": float(stats[0]),
                "snr_std": float(stats[1]),
                "cnr_mean": float(stats[2]),
                "cnr_std": float(stats[3]),
            }
        return out


def _compression_positive_strain(frames, i, j, dp_params, strain_window, cache):
    """Strain image of the ordered pair (min, max), negated so compression
    shows as positive strain."""
    key = (min(i, j), max(i, j))
    if key not in cache:
        disp = quality.dense_displacement(frames[key[0]], frames[key[1]], dp_params)
        cache[key] = -quality.lsq_strain(disp, strain_window).strain
    return cache[key]


def _pair_metrics(img, target, background) -> tuple[float, float]:
    """SNR/CNR of one strain image; a window with zero variance (flat
    integer displacement, no signal) scores 0 instead of raising."""
    try:
        s = quality.snr(img, background)
    except ValueError:
        s = 0.0
    try:
        c = quality.cnr(img, target, background)
    except ValueError:
        c = 0.0
    return s, c


def evaluate_sequence(
    sequence,
    ground_truth: rfsim.SequenceGroundTruth | None,
    basis: pcabasis.PcaBasis,
    model: mlp.MlpModel,
    p: int = 5,
    dp_params: dptrack.DpParams | None = None,
    window: int = DEFAULT_PAIR_WINDOW,
    strain_window: int = quality.DEFAULT_STRAIN_WINDOW,
    skips: tuple[int, ...] = (1, 2, 3),
    psf: rfsim.PsfParams | None = None,
    windows=None,
    include_none_found: bool = False,
) -> EvalTable:
    """Compare selected pairing against skip-k baselines on one sequence.

    Every reference frame contributes one skip-k pair per baseline (when
    i+k is in range) and, unless the selector abstained (none_found with
    include_none_found False), one selected pair. Strain images are computed
    on the ordered pair (min, max) with dense median-filtered DP
    displacement. With ground truth, quality windows track the inclusion as
    cumulative deformation carries it through the image; otherwise they sit
    at the stock simulation geometry (or are passed in explicitly).
    """
    n = len(sequence)
    if n < 10:
        raise ValueError(f"need at least 10 frames to evaluate, got {n}")
    shape = np.asarray(getattr(sequence[0], "samples", sequence[0])).shape
    window_cache: dict[int, tuple] = {}

    def windows_for(i: int, j: int):
        if windows is not None:
            return windows
        if ground_truth is None:
            return quality.default_windows(shape[0], shape[1], strain_window, psf)
        lo = min(i, j)
        if lo not in window_cache:
            inc = ground_truth.inclusion0
            amap = ground_truth.in_maps[lo]
            center = amap @ np.array([inc.center_mm[0], inc.center_mm[1], 1.0])
            window_cache[lo] = quality.inclusion_windows(
                shape[0],
                shape[1],
                strain_window,
                psf,
                (center[0], center[1]),
                inc.radius_mm * abs(amap[0, 0]),
                inc.radius_mm * abs(amap[1, 1]),
            )
        return window_cache[lo]

    scores: dict[tuple[int, int], float] = {}
    selections = [
        select_pair(sequence, i, basis, model, window=window, p=p, dp_params=dp_params, scores=scores)
        for i in range(n)
    ]

    strain_cache: dict[tuple[int, int], np.ndarray] = {}
    rows = []
    for sel in selections:
        if sel.none_found and not include_none_found:
            continue
        img = _compression_positive_strain(sequence, sel.ref_frame, sel.chosen_partner, dp_params, strain_window, strain_cache)
        target, background = windows_for(sel.ref_frame, sel.chosen_partner)
        s, c = _pair_metrics(img, target, background)
        rows.append((sel.ref_frame, sel.chosen_partner, "selected", s, c))
    for k in skips:
        if not 1 <= k < n:
            raise ValueError(f"skip {k} out of range for {n} frames")
        for i in range(n - k):
            img = _compression_positive_strain(sequence, i, i + k, dp_params, strain_window, strain_cache)
            target, background = windows_for(i, i + k)
            s, c = _pair_metrics(img, target, background)
            rows.append((i, i + k, f"skip{k}", s, c))
    return EvalTable(rows, selections)


# ---------------------------------------------------------------------------
# Training-corpus helpers

def truth_label_map(pairs) -> dict[tuple[int, int], int]:
    """(i, j) -> label from PairTruth rows or a SequenceGroundTruth."""
    rows = pairs.pairs if isinstance(pairs, rfsim.SequenceGroundTruth) else pairs
    return {(p.frame_i, p.frame_j): p.label for p in rows}


def join_features_labels(
    feature_rows: list[features.FeatureVector],
    labels: dict[tuple[int, int], int],
    use_residual: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Build (x, y) from feature rows joined with a label map on (i, j)."""
    xs, ys = [], []
    for fv in feature_rows:
        if fv.pair_ids not in labels:
            raise ValueError(f"pair {fv.pair_ids} missing from ground truth")
        vec = np.append(fv.w, fv.residual_rms) if use_residual else fv.w
        xs.append(vec)
        ys.append(labels[fv.pair_ids])
    if not xs:
        raise ValueError("no feature rows to join")
    return np.array(xs), np.array(ys, dtype=np.int64)


def balance_dataset(x: np.ndarray, y: np.ndarray, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Subsample the majority class to the minority count (seeded, stable order)."""
    rng = np.random.default_rng(seed)
    idx0 = np.nonzero(y == 0)[0]
    idx1 = np.nonzero(y == 1)[0]
    if idx0.size == 0 or idx1.size == 0:
        raise ValueError("cannot balance a single-class dataset")
    k = min(idx0.size, idx1.size)
    keep = np.sort(np.concatenate([rng.choice(idx0, k, replace=False), rng.choice(idx1, k, replace=False)]))
    return x[keep], y[keep]


def build_classifier_dataset(
    seed,
    basis: pcabasis.PcaBasis,
    min_per_class: int = 450,
    max_sequences: int = 24,
    n_frames: int = 17,
    presets: tuple[str, ...] = ("steady", "mixed", "events"),
    p: int = 5,
    dp_params: dptrack.DpParams | None = None,
    use_residual: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate sequences (cycling the motion presets) and extract labeled
    pairs until both classes reach min_per_class or the sequence cap is hit.
    Frame dims follow the basis. Steady sequences supply most of the good
    pairs, mixed ones most of the bad."""
    m, l = basis.frame_dims
    root = np.random.SeedSequence(seed)
    xs, ys = [], []
    counts = np.zeros(2, dtype=np.int64)
    for k, child in enumerate(root.spawn(max_sequences)):
        script = rfsim.make_motion_script(child.spawn(1)[0], n_frames - 1, presets[k % len(presets)])
        frames_k, truth = rfsim.simulate_sequence(child, n_frames, script, m=m, l=l)
        arrays = [f.samples for f in frames_k]
        pairs = [(t.frame_i, t.frame_j) for t in truth.pairs]
        rows = features.extract_features_batch(arrays, pairs, basis, p=p, dp_params=dp_params)
        x, y = join_features_labels(rows, truth_label_map(truth), use_residual)
        xs.append(x)
        ys.append(y)
        counts += np.bincount(y, minlength=2)
        if counts.min() >= min_per_class:
            break
    return np.concatenate(xs), np.concatenate(ys)


# ---------------------------------------------------------------------------
# CLI

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_config(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {lineno}: {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _resolve(args: argparse.Namespace, spec: dict[str, tuple]) -> argparse.Namespace:
    """Apply defaults < config file < explicit flags."""
    config = _read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(spec)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, (cast, default) in spec.items():
        if getattr(args, key, None) is None:
            setattr(args, key, cast(config[key]) if key in config else default)
    return args


def _grid(text: str) -> tuple[int, int]:
    parts = text.lower().replace("x", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"bad grid spec: {text!r}")
    return int(parts[0]), int(parts[1])


def _build_parser() -> _Parser:
    parser = _Parser(prog="framepick", description="RF frame-pair selection for strain imaging")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--seed", type=int)
        return sp

    sp = add("simulate", "render a deforming-phantom RF sequence with ground truth")
    sp.add_argument("--out", help="output .rfb path")
    sp.add_argument("--truth", help="output ground-truth CSV path")
    sp.add_argument("--frames", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--l", type=int)
    sp.add_argument("--preset", choices=("steady", "events", "mixed"))
    sp.add_argument("--density", type=float)
    sp.add_argument("--window", type=int)

    sp = add("train-pca", "fit the displacement PCA basis on simulated fields")
    sp.add_argument("--out", help="output .pcb path")
    sp.add_argument("--fields", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--l", type=int)
    sp.add_argument("--grid", type=_grid)
    sp.add_argument("--components", type=int)
    sp.add_argument("--center", type=_parse_bool)
    sp.add_argument("--noise", type=float)

    sp = add("extract-features", "DP-track pairs of an RF sequence into weight features")
    sp.add_argument("--rfb")
    sp.add_argument("--basis")
    sp.add_argument("--out", help="output features CSV path")
    sp.add_argument("--p", type=int)
    sp.add_argument("--dmax", type=int)
    sp.add_argument("--window", type=int)

    sp = add("train-mlp", "train the good/bad pair classifier from feature+truth CSVs")
    sp.add_argument("--features", action="append", help="features CSV (repeatable)")
    sp.add_argument("--truth", action="append", help="ground-truth CSV (repeatable, parallel)")
    sp.add_argument("--out", help="output .mlp path")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--balance", action="store_const", const=True)
    sp.add_argument("--use-residual", dest="use_residual", action="store_const", const=True)

    sp = add("select", "pick the best partner frame for one reference frame")
    sp.add_argument("--rfb")
    sp.add_argument("--basis")
    sp.add_argument("--model")
    sp.add_argument("--ref", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--dmax", type=int)
    sp.add_argument("--out", help="write the one-line record here instead of stdout")

    sp = add("evaluate", "compare selected pairing with skip-1/2/3 baselines")
    sp.add_argument("--rfb")
    sp.add_argument("--basis")
    sp.add_argument("--model")
    sp.add_argument("--out", help="output metrics CSV path")
    sp.add_argument("--window", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--dmax", type=int)
    sp.add_argument("--strain-window", dest="strain_window", type=int)

    sp = add("bench", "latency report: feature extraction and 16-pair classification")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--l", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--dmax", type=int)
    return parser


def _require(args, *keys) -> None:
    for key in keys:
        if getattr(args, key, None) in (None, []):
            raise _UsageError(f"--{key.replace('_', '-')} is required")


def _dp_params(args) -> dptrack.DpParams:
    return dptrack.DpParams(d_max=args.dmax) if args.dmax is not None else dptrack.DpParams()


def _cmd_simulate(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "frames": (int, 17),
            "m": (int, 512),
            "l": (int, 128),
            "preset": (str, "events"),
            "density": (float, 12.0),
            "window": (int, DEFAULT_PAIR_WINDOW),
            "out": (str, None),
            "truth": (str, None),
        },
    )
    _require(args, "out", "truth")
    script = rfsim.make_motion_script(args.seed, args.frames - 1, args.preset)
    frames_, truth = rfsim.simulate_sequence(
        args.seed, args.frames, script, m=args.m, l=args.l, density_per_mm2=args.density, pair_window=args.window
    )
    psf = frames_[0].psf
    rfsim.write_rfb(args.out, frames_, psf.sampling_frequency_hz, psf.center_frequency_hz)
    rfsim.write_truth_csv(args.truth, truth)
    print(f"wrote {args.frames} frames ({args.m}x{args.l}) to {args.out}, {len(truth.pairs)} labeled pairs to {args.truth}")
    return 0


def _cmd_train_pca(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "fields": (int, 200),
            "m": (int, 512),
            "l": (int, 128),
            "grid": (_grid, pcabasis.DEFAULT_GRID),
            "components": (int, 12),
            "center": (_parse_bool, False),
            "noise": (float, 0.01),
            "out": (str, None),
        },
    )
    _require(args, "out")
    fields = rfsim.make_training_fields(args.seed, args.fields, args.m, args.l, args.noise)
    basis = pcabasis.fit_pca(fields, args.components, args.grid, args.center)
    pcabasis.save_basis(args.out, basis)
    captured = float(basis.explained_variance_ratio.sum())
    print(f"fit {args.components} components on {args.fields} fields; captured variance {captured:.4f}; wrote {args.out}")
    return 0


def _pair_candidates(n: int, window: int) -> list[tuple[int, int]]:
    half = window // 2
    return [(i, j) for i in range(n) for j in range(max(0, i - half), min(n, i + half + 1)) if j != i]


def _cmd_extract_features(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "p": (int, 5),
            "dmax": (int, None),
            "window": (int, DEFAULT_PAIR_WINDOW),
            "rfb": (str, None),
            "basis": (str, None),
            "out": (str, None),
        },
    )
    _require(args, "rfb", "basis", "out")
    frames_, _, _ = rfsim.read_rfb(args.rfb)
    basis = pcabasis.load_basis(args.basis)
    pairs = _pair_candidates(frames_.shape[0], args.window)
    rows = features.extract_features_batch(list(frames_), pairs, basis, p=args.p, dp_params=_dp_params(args))
    features.write_features_csv(args.out, rows)
    print(f"extracted {len(rows)} pair features from {args.rfb} to {args.out}")
    return 0


def _cmd_train_mlp(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "epochs": (int, 300),
            "batch_size": (int, 32),
            "lr": (float, 1e-3),
            "balance": (_parse_bool, False),
            "use_residual": (_parse_bool, False),
            "features": (str, None),
            "truth": (str, None),
            "out": (str, None),
        },
    )
    _require(args, "features", "truth", "out")
    feats = args.features if isinstance(args.features, list) else [args.features]
    truths = args.truth if isinstance(args.truth, list) else [args.truth]
    if len(feats) != len(truths):
        raise ValueError(f"{len(feats)} --features files but {len(truths)} --truth files")
    xs, ys = [], []
    for fpath, tpath in zip(feats, truths):
        rows = features.read_features_csv(fpath)
        labels = truth_label_map(rfsim.read_truth_csv(tpath))
        x, y = join_features_labels(rows, labels, args.use_residual)
        xs.append(x)
        ys.append(y)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if args.balance:
        x, y = balance_dataset(x, y, args.seed)
    config = mlp.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        layer_dims=(x.shape[1], 64, 32, 2),
    )
    model, history = train_scaled(x, y, config)
    mlp.save_model(args.out, model)
    print(
        f"trained on {y.size} pairs ({int(np.sum(y == 1))} good / {int(np.sum(y == 0))} bad); "
        f"best val accuracy {history.best_val_accuracy:.4f} at epoch {history.best_epoch}; wrote {args.out}"
    )
    return 0


def _cmd_select(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "ref": (int, None),
            "window": (int, DEFAULT_PAIR_WINDOW),
            "p": (int, 5),
            "dmax": (int, None),
            "rfb": (str, None),
            "basis": (str, None),
            "model": (str, None),
            "out": (str, None),
        },
    )
    _require(args, "rfb", "basis", "model", "ref")
    frames_, _, _ = rfsim.read_rfb(args.rfb)
    basis = pcabasis.load_basis(args.basis)
    model = mlp.load_model(args.model)
    sel = select_pair(list(frames_), args.ref, basis, model, window=args.window, p=args.p, dp_params=_dp_params(args))
    record = (
        f"ref={sel.ref_frame} partner={sel.chosen_partner} prob_good={sel.prob_good!r} "
        f"none_found={str(sel.none_found).lower()}"
    )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(record + "\n")
    else:
        print(record)
    return 0


def _cmd_evaluate(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "window": (int, DEFAULT_PAIR_WINDOW),
            "p": (int, 5),
            "dmax": (int, None),
            "strain_window": (int, quality.DEFAULT_STRAIN_WINDOW),
            "rfb": (str, None),
            "basis": (str, None),
            "model": (str, None),
            "out": (str, None),
        },
    )
    _require(args, "rfb", "basis", "model", "out")
    frames_, fs, fc = rfsim.read_rfb(args.rfb)
    basis = pcabasis.load_basis(args.basis)
    model = mlp.load_model(args.model)
    psf = rfsim.PsfParams(center_frequency_hz=fc, sampling_frequency_hz=fs)
    table = evaluate_sequence(
        list(frames_),
        None,
        basis,
        model,
        p=args.p,
        dp_params=_dp_params(args),
        window=args.window,
        strain_window=args.strain_window,
        psf=psf,
    )
    quality.write_metrics_csv(args.out, table.rows)
    for method, stats in table.summary().items():
        print(
            f"{method}: SNR {stats['snr_mean']:.3f} +- {stats['snr_std']:.3f}, "
            f"CNR {stats['cnr_mean']:.3f} +- {stats['cnr_std']:.3f} (n={stats['count']})"
        )
    print(f"wrote per-pair metrics to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    _resolve(
        args,
        {
            "seed": (int, 0),
            "reps": (int, 200),
            "m": (int, 2304),
            "l": (int, 384),
            "p": (int, 5),
            "dmax": (int, None),
        },
    )
    if args.reps < 100:
        raise ValueError(f"--reps must be >= 100, got {args.reps}")
    dp_params = _dp_params(args)
    root = np.random.SeedSequence(args.seed)
    s_fields, s_seq, s_model = root.spawn(3)

    fields = rfsim.make_training_fields(s_fields, 16, args.m, args.l)
    basis = pcabasis.fit_pca(fields, 12)
    del fields
    script = [rfsim.DeformationParams(axial_strain=0.012)]
    frames_, _ = rfsim.simulate_sequence(s_seq, 2, script, m=args.m, l=args.l)
    f1, f2 = frames_[0].samples, frames_[1].samples

    features.extract_features(f1, f2, basis, p=args.p, dp_params=dp_params)  # warm the jit cache
    extract_ms = []
    for _ in range(args.reps):
        t0 = time.perf_counter()
        features.extract_features(f1, f2, basis, p=args.p, dp_params=dp_params)
        extract_ms.append(1e3 * (time.perf_counter() - t0))

    rng = np.random.default_rng(s_model)
    model = mlp.init_model(rng, (basis.n_components, 64, 32, 2))
    cand = rng.standard_normal((DEFAULT_PAIR_WINDOW, basis.n_components))
    classify_ms = []
    for _ in range(args.reps):
        t0 = time.perf_counter()
        probs = mlp.forward(model, cand)[:, 1]
        int(np.argmax(probs))
        classify_ms.append(1e3 * (time.perf_counter() - t0))

    for name, samples in (("extract_features", extract_ms), ("classify_16", classify_ms)):
        arr = np.array(samples)
        print(
            f"{name}: median {np.median(arr):.3f} ms, p95 {np.percentile(arr, 95):.3f} ms, "
            f"max {arr.max():.3f} ms (n={args.reps}, frame {args.m}x{args.l}, p={args.p})"
        )
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train-pca": _cmd_train_pca,
    "extract-features": _cmd_extract_features,
    "train-mlp": _cmd_train_mlp,
    "select": _cmd_select,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
}


def cli(argv=None) -> int:
    """Run one CLI command; returns the exit code (0 ok, 1 usage, 2 data)."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (see --help)")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())
