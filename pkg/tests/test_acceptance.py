"""Acceptance criteria, one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Criteria 7-10 share one generated blob dataset and the models trained
on it (module-scoped fixtures) so the whole suite stays fast.
"""

import textwrap
import time
from contextlib import contextmanager

import numpy as np
import pytest

from segclf.cli import main
from segclf.dataset import (
    fit_standardizer,
    apply_standardizer,
    load_labels,
    vocabulary_for_task,
)
from segclf.ensemble import EnsembleConfig, ProbabilityMatrix, load_probabilities, soft_vote
from segclf.knn import KnnConfig, knn_train
from segclf.forest import ForestConfig, forest_train
from segclf.metrics import ConfusionMatrix, confusion, score
from segclf.persistence import PipelineModel, load_model, save_model
from segclf.selection import anova_f_scores, select_top_k, apply_selection
from segclf.svm import SvmConfig, rbf_kernel, solve_binary, svm_train

from conftest import make_labels, make_table
from oracles import (
    brute_force_dual,
    dual_objective,
    kkt_bias,
    kkt_violations,
    oracle_predictions,
    random_binary_problem,
)

VOCAB3 = vocabulary_for_task("arousal")


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    print(f"[PASS] criterion {number}: {description}")


# ---------------------------------------------------------------------------
# criteria 1-2: SMO vs brute force, KKT audit
# ---------------------------------------------------------------------------


def _suite_problems():
    rng = np.random.default_rng(20240901)
    c_values = (0.1, 1.0, 10.0)
    problems = []
    for t in range(50):
        x, y = random_binary_problem(rng, max_n=6, max_d=3)
        problems.append((x, y, c_values[t % 3]))
    return problems


@pytest.fixture(scope="module")
def smo_suite():
    """50 random problems solved at tight and at default tolerance."""
    solved = []
    start = time.monotonic()
    for x, y, c in _suite_problems():
        gamma = 1.0 / x.shape[1]
        kernel = rbf_kernel(x, x, gamma)
        tight = solve_binary(kernel, y, SvmConfig(c=c, gamma_mode="explicit", gamma=gamma, tolerance=1e-9))
        default = solve_binary(kernel, y, SvmConfig(c=c, gamma_mode="explicit", gamma=gamma))
        solved.append((kernel, y, c, tight, default))
    return solved, time.monotonic() - start


def test_criterion_1_smo_oracle_equivalence(smo_suite):
    with criterion(1, "SMO dual matches brute-force grid on 50 problems, < 30 s"):
        problems, solve_seconds = smo_suite
        start = time.monotonic()
        for kernel, y, c, (alpha, bias, converged), _ in problems:
            assert converged
            grid_alpha, grid_obj = brute_force_dual(kernel, y, c)
            q = np.outer(y, y) * kernel
            assert abs(dual_objective(alpha, q) - grid_obj) <= 1e-6
            grid_bias = kkt_bias(kernel, y, c, grid_alpha, at_bound=2e-5 * max(1.0, c))
            assert np.array_equal(
                oracle_predictions(kernel, y, alpha, bias),
                oracle_predictions(kernel, y, grid_alpha, grid_bias),
            )
        elapsed = solve_seconds + (time.monotonic() - start)
        assert elapsed < 30.0, f"solve + oracle comparison took {elapsed:.1f}s"


def test_criterion_2_kkt_audit(smo_suite):
    with criterion(2, "KKT audit at tolerance 1e-3 on every trained binary machine"):
        problems, _ = smo_suite
        for kernel, y, c, (a_tight, b_tight, _), (a_def, b_def, conv_def) in problems:
            assert conv_def
            assert kkt_violations(kernel, y, c, a_tight, b_tight, 1e-3) == []
            assert kkt_violations(kernel, y, c, a_def, b_def, 1e-3) == []


# ---------------------------------------------------------------------------
# criteria 3-4: ANOVA fixture and selection recovery
# ---------------------------------------------------------------------------


def test_criterion_3_anova_fixture_and_invariance():
    with criterion(3, "ANOVA F fixture 13.5 +/- 1e-9; shift/scale invariance 1e-6 rel"):
        table = make_table(np.array([[1.0, 2, 3, 4, 5, 6]]).T)
        labels = make_labels([0, 0, 0, 1, 1, 1])
        f = anova_f_scores(table, labels)
        assert abs(f[0] - 13.5) <= 1e-9
        rng = np.random.default_rng(31)
        values = rng.normal(0.0, 1.0, size=(40, 100))
        y = make_labels(np.concatenate([[0, 1, 2], rng.integers(0, 3, 37)]))
        base = anova_f_scores(make_table(values), y)
        shift = rng.uniform(-50, 50, size=100)
        scale = rng.uniform(0.1, 20, size=100)
        shifted = anova_f_scores(make_table(values + shift), y)
        scaled = anova_f_scores(make_table(values * scale), y)
        assert np.abs(shifted - base).max() <= 1e-6 * np.abs(base).max()
        assert np.allclose(shifted, base, rtol=1e-6)
        assert np.allclose(scaled, base, rtol=1e-6)


def test_criterion_4_selection_recovery():
    with criterion(4, "informative column ranks first in >= 99 of 100 seeded trials"):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            labels = np.tile([0, 1, 2], 20)
            values = rng.normal(0.0, 1.0, size=(60, 100))
            target = int(rng.integers(0, 100))
            values[:, target] = labels + rng.normal(0.0, 0.1, size=60)
            f = anova_f_scores(make_table(values), make_labels(labels))
            if int(np.argmax(f)) == target:
                hits += 1
        assert hits >= 99, f"informative column ranked first in only {hits}/100 trials"


# ---------------------------------------------------------------------------
# criteria 5-6: metrics and ensemble fixtures
# ---------------------------------------------------------------------------


def test_criterion_5_metrics_fixture_and_identity(vocab2):
    with criterion(5, "confusion fixture scores uar = micro_f1 = 0.75; micro_f1 == accuracy"):
        report = score(ConfusionMatrix(vocab2, np.array([[1, 1], [0, 2]])))
        assert report.uar == 0.75
        assert report.micro_f1 == 0.75
        rng = np.random.default_rng(52)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(1, 40))
            k = int(rng.integers(2, 6))
            ref = rng.integers(0, k, n)
            pred = rng.integers(0, k, n)
            vocab = vocabulary_for_task("topic")
            cm = confusion(make_labels(ref), make_labels(pred), vocab)
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = score(cm)
            accuracy = float(np.mean(ref == pred))
            assert rep.micro_f1 == accuracy
            checked += 1


def test_criterion_6_ensemble_fixtures(vocab2, vocab3):
    with criterion(6, "soft vote mean fixture (0.6, 0.4); weight-scaling argmax invariance"):
        a = ProbabilityMatrix(("s0",), vocab2, np.array([[0.8, 0.2]]))
        b = ProbabilityMatrix(("s0",), vocab2, np.array([[0.4, 0.6]]))
        out = soft_vote([a, b], EnsembleConfig((0.5, 0.5)))
        # exact up to one float rounding step per entry
        assert np.allclose(out.probs[0], [0.6, 0.4], rtol=0.0, atol=1e-15)
        rng = np.random.default_rng(61)
        rows = 0
        while rows < 1000:
            n = int(rng.integers(1, 20))
            pa = rng.dirichlet((1.0, 1.0, 1.0), size=n)
            pb = rng.dirichlet((1.0, 1.0, 1.0), size=n)
            ids = tuple(f"s{i}" for i in range(n))
            ma = ProbabilityMatrix(ids, vocab3, pa)
            mb = ProbabilityMatrix(ids, vocab3, pb)
            w = (float(rng.uniform(0.1, 5)), float(rng.uniform(0.1, 5)))
            lam = float(rng.uniform(0.1, 10))
            base = soft_vote([ma, mb], EnsembleConfig(w))
            scaled = soft_vote([ma, mb], EnsembleConfig((lam * w[0], lam * w[1])))
            assert np.array_equal(
                base.probs.argmax(axis=1), scaled.probs.argmax(axis=1)
            )
            rows += n


# ---------------------------------------------------------------------------
# criteria 7-10: end-to-end pipeline on the synthetic blob task
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def blob_task(tmp_path_factory):
    root = tmp_path_factory.mktemp("blobs")
    data = root / "data"
    gen_cfg = root / "gen.ini"
    gen_cfg.write_text(
        textwrap.dedent(
            f"""
            [run]
            task = arousal
            seed = 424242
            output_dir = {data}

            [synthetic]
            n_train = 600
            n_test = 200
            n_unlabeled = 150
            n_features = 500
            n_informative = 20
            separation = 2.0
            """
        )
    )
    assert main(["gen-synthetic", "--config", str(gen_cfg)]) == 0
    return root, data


def pipeline_cfg(root, data, name, classifier_body, extra=""):
    out = root / name
    path = root / f"{name}.ini"
    path.write_text(
        textwrap.dedent(
            f"""
            [run]
            task = arousal
            seed = 424242
            output_dir = {out}

            [data]
            train_features = {data}/train_features.csv
            train_labels = {data}/train_labels.csv
            test_features = {data}/test_features.csv
            test_labels = {data}/test_labels.csv
            unlabeled_features = {data}/unlabeled_features.csv

            [selection]
            mode = top_k
            k = 20

            """
        )
        + classifier_body
        + "\n"
        + extra
    )
    return str(path), out


def run_pipeline(cfg_path, out, data):
    assert main(["train", "--config", cfg_path]) == 0
    assert main(
        [
            "predict",
            "--model",
            str(out / "model.json"),
            "--features",
            f"{data}/test_features.csv",
            "--out",
            str(out),
        ]
    ) == 0
    assert main(
        [
            "evaluate",
            "--config",
            cfg_path,
            "--predictions",
            str(out / "predictions.csv"),
            "--labels",
            f"{data}/test_labels.csv",
        ]
    ) == 0
    scores = dict(
        line.split(",") for line in (out / "scores.csv").read_text().splitlines()[1:]
    )
    return {k: float(v) for k, v in scores.items()}


@pytest.fixture(scope="module")
def svm_run(blob_task):
    root, data = blob_task
    cfg_path, out = pipeline_cfg(
        root, data, "svm_run", "[svm]\nc = 0.0538\ngamma = automatic"
    )
    start = time.monotonic()
    scores = run_pipeline(cfg_path, out, data)
    elapsed = time.monotonic() - start
    return cfg_path, out, scores, elapsed


@pytest.fixture(scope="module")
def forest_run(blob_task):
    root, data = blob_task
    cfg_path, out = pipeline_cfg(
        root, data, "forest_run", "[forest]\nmax_depth = 7\nn_trees = 100"
    )
    scores = run_pipeline(cfg_path, out, data)
    return cfg_path, out, scores


def test_criterion_7_end_to_end_synthetic(svm_run, forest_run):
    with criterion(7, "blob task: select+svm micro_f1 >= 0.90 in < 60 s; forest >= 0.85"):
        _, _, svm_scores_, svm_elapsed = svm_run
        assert svm_scores_["micro_f1"] >= 0.90, f"svm micro_f1 = {svm_scores_['micro_f1']}"
        assert svm_elapsed < 60.0, f"svm pipeline took {svm_elapsed:.1f}s"
        _, _, forest_scores_ = forest_run
        assert forest_scores_["micro_f1"] >= 0.85, (
            f"forest micro_f1 = {forest_scores_['micro_f1']}"
        )


def test_criterion_8_pseudo_label_contract(blob_task, forest_run):
    # One-vs-one SVM pseudo-probabilities are capped at 0.75 for 3 classes
    # (2 votes + softmax over 3 pairs + 1), so the tau = 0.9 round runs on
    # the forest's probability files.
    with criterion(8, "pseudo-labeling: exact threshold set, leakage guard, 2 disjoint rounds"):
        root, data = blob_task
        _, out, _ = forest_run
        pl_cfg, pl_out = pipeline_cfg(
            root,
            data,
            "pl_run",
            "[forest]\nmax_depth = 7\nn_trees = 100",
            extra="[pseudo_label]\nconfidence_threshold = 0.9\n",
        )
        # round 1 scores come from the criterion-7 model
        scores_dir = pl_out / "round1_scores"
        assert main(
            [
                "predict",
                "--model",
                str(out / "model.json"),
                "--features",
                f"{data}/unlabeled_features.csv",
                "--out",
                str(scores_dir),
            ]
        ) == 0
        scores1 = load_probabilities(scores_dir / "probabilities.csv", VOCAB3)
        expected_ids = {
            sid
            for sid, p in zip(scores1.segment_ids, scores1.probs.max(axis=1))
            if p >= 0.9
        }
        assert main(
            ["pseudo-label", "--config", pl_cfg, "--out", str(pl_out), "--scores", str(scores_dir / "probabilities.csv")]
        ) == 0
        aug_labels = load_labels(pl_out / "augmented_labels.csv", VOCAB3)
        added_round1 = set(aug_labels.segment_ids[600:])
        assert added_round1 == expected_ids
        assert 0 < len(added_round1) < 150

        # leakage guard: unlabeled pointing at the training features, with a
        # scores file that covers those very segments
        leak_cfg, leak_out = pipeline_cfg(
            root,
            data,
            "pl_leak",
            "[forest]\nmax_depth = 7",
            extra="[pseudo_label]\nconfidence_threshold = 0.9\n",
        )
        leak_text = (root / "pl_leak.ini").read_text().replace(
            f"unlabeled_features = {data}/unlabeled_features.csv",
            f"unlabeled_features = {data}/train_features.csv",
        )
        (root / "pl_leak.ini").write_text(leak_text)
        leak_scores = leak_out / "train_scores"
        assert main(
            [
                "predict",
                "--model",
                str(out / "model.json"),
                "--features",
                f"{data}/train_features.csv",
                "--out",
                str(leak_scores),
            ]
        ) == 0
        assert main(
            ["pseudo-label", "--config", leak_cfg, "--scores", str(leak_scores / "probabilities.csv")]
        ) == 3

        # retrain on the augmented files, then a disjoint second round
        retrain_cfg, retrain_out = pipeline_cfg(
            root, data, "pl_retrain", "[forest]\nmax_depth = 7\nn_trees = 100"
        )
        retrain_text = (root / "pl_retrain.ini").read_text().replace(
            f"train_features = {data}/train_features.csv",
            f"train_features = {pl_out}/augmented_features.csv",
        ).replace(
            f"train_labels = {data}/train_labels.csv",
            f"train_labels = {pl_out}/augmented_labels.csv",
        ).replace(
            f"unlabeled_features = {data}/unlabeled_features.csv",
            f"unlabeled_features = {pl_out}/remaining_unlabeled_features.csv",
        )
        (root / "pl_retrain.ini").write_text(retrain_text)
        assert main(["train", "--config", retrain_cfg]) == 0
        round2_scores = retrain_out / "round2_scores"
        assert main(
            [
                "predict",
                "--model",
                str(retrain_out / "model.json"),
                "--features",
                str(pl_out / "remaining_unlabeled_features.csv"),
                "--out",
                str(round2_scores),
            ]
        ) == 0
        extra_pl = "[pseudo_label]\nconfidence_threshold = 0.9\n"
        (root / "pl_retrain.ini").write_text(retrain_text + extra_pl)
        assert main(
            [
                "pseudo-label",
                "--config",
                retrain_cfg,
                "--out",
                str(retrain_out),
                "--scores",
                str(round2_scores / "probabilities.csv"),
                "--round",
                "2",
            ]
        ) == 0
        aug2 = load_labels(retrain_out / "augmented_labels.csv", VOCAB3)
        added_round2 = set(aug2.segment_ids) - set(aug_labels.segment_ids)
        assert added_round1.isdisjoint(added_round2)
        assert len(aug2.segment_ids) >= len(aug_labels.segment_ids)
        from segclf.dataset import read_label_provenance

        prov2 = read_label_provenance(retrain_out / "augmented_labels.csv")
        assert all(prov2[sid] == "pseudo_round_1" for sid in added_round1)
        assert all(prov2[sid] == "pseudo_round_2" for sid in added_round2)
        assert all(prov2[sid] == "train" for sid in aug2.segment_ids[:600])


def test_criterion_9_persistence_byte_identical(tmp_path):
    with criterion(9, "save/load/predict byte-identical for svm, forest, and knn"):
        rng = np.random.default_rng(90)
        centers = np.array([[-2.0, 0.0, 1.0], [2.0, 1.0, -1.0], [0.0, -2.0, 2.0]])
        labels = np.tile([0, 1, 2], 20)
        x = make_table(centers[labels] + rng.normal(0, 0.6, (60, 3)))
        y = make_labels(labels)
        queries = make_table(
            rng.normal(0, 2, (100, 3)), ids=[f"q{i}" for i in range(100)]
        )
        std = fit_standardizer(x)
        zx = apply_standardizer(std, x)
        report = select_top_k(zx, y, 2)
        fx = apply_selection(report, zx)
        classifiers = {
            "svm": (svm_train(fx, y, SvmConfig(c=1.0), n_classes=3), std, report),
            "forest": (
                forest_train(apply_selection(report, x), y, ForestConfig(n_trees=20, seed=2), n_classes=3),
                None,
                report,
            ),
            "knn": (knn_train(fx, y, KnnConfig(k_neighbors=5), n_classes=3), std, report),
        }
        from segclf.dataset import write_labels

        for name, (clf, stdz, rep) in classifiers.items():
            model = PipelineModel(VOCAB3, x.feature_names, stdz, rep, clf)
            path = tmp_path / f"{name}.json"
            save_model(model, path)
            loaded = load_model(path)
            mem_file = tmp_path / f"{name}_mem.csv"
            disk_file = tmp_path / f"{name}_disk.csv"
            write_labels(model.predict(queries), VOCAB3, mem_file)
            write_labels(loaded.predict(queries), VOCAB3, disk_file)
            assert mem_file.read_bytes() == disk_file.read_bytes(), name


def test_criterion_10_run_determinism(blob_task):
    with criterion(10, "identical config+seed give byte-identical prediction/report files"):
        root, data = blob_task
        outputs = []
        for name in ("det_a", "det_b"):
            cfg_path, out = pipeline_cfg(
                root, data, name, "[forest]\nmax_depth = 7\nn_trees = 40"
            )
            assert main(["select", "--config", cfg_path]) == 0
            run_pipeline(cfg_path, out, data)
            outputs.append(out)
        a, b = outputs
        for artifact in (
            "f_scores.csv",
            "f_scores.png",
            "model.json",
            "predictions.csv",
            "probabilities.csv",
            "scores.csv",
            "confusion.csv",
            "confusion.png",
            "report.txt",
        ):
            assert (a / artifact).read_bytes() == (b / artifact).read_bytes(), artifact
