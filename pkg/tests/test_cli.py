import csv
import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from poprank import BiadjacencyMatrix, PopRankConfig, prune_matrix, rca_matrix, run
from poprank.cli import main
from poprank.ingest import WindowConfig, aggregate_training, load_interactions
from poprank.synth import fitness_complexity

TRAIN, TEST = "40:55", "56:61"


def ingest_args(data, work, *extra):
    return ["ingest", "--interactions", str(data / "interactions.csv"),
            "--pages", str(data / "pages.csv"), "--train", TRAIN, "--test", TEST,
            "--out", str(work), *extra]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    data = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(data), "--n-users", "200", "--n-pages", "25"]) == 0
    return data


@pytest.fixture
def work(dataset, tmp_path):
    w = tmp_path / "work"
    assert main(ingest_args(dataset, w)) == 0
    return w


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_outputs(dataset):
    for name in ("interactions.csv", "pages.csv", "truth.csv", "synth.json"):
        assert (dataset / name).exists()
    assert json.loads((dataset / "synth.json").read_text())["n_pages"] == 25


def test_ingest_requires_windows(dataset, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["ingest", "--interactions", str(dataset / "interactions.csv"),
              "--pages", str(dataset / "pages.csv"), "--out", str(tmp_path)])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(ingest_args(dataset, tmp_path, "--train", "55:40"))
    assert info.value.code == 2


def test_ingest_matches_library_bookkeeping(dataset, work):
    v = BiadjacencyMatrix.from_dict(json.loads((work / "matrix.json").read_text()))
    records = load_interactions(dataset / "interactions.csv")
    expected = aggregate_training(records, WindowConfig(40, 55, 56, 61))
    assert v == expected
    manifest = json.loads((work / "manifest.json").read_text())
    assert manifest["window"]["min_page_comments"] == 5
    assert not manifest["inputs"]["interactions"]["path"].startswith("/")
    assert len(read_csv(work / "targets.csv")) == v.n_pages


def test_min_comments_zero_disables_filter(dataset, work, tmp_path):
    loose = tmp_path / "loose"
    assert main(ingest_args(dataset, loose, "--min-comments", "0")) == 0
    a = BiadjacencyMatrix.from_dict(json.loads((work / "matrix.json").read_text()))
    b = BiadjacencyMatrix.from_dict(json.loads((loose / "matrix.json").read_text()))
    assert set(a.page_index) <= set(b.page_index)
    assert b.n_pages >= a.n_pages and b.n_users >= a.n_users


def test_bad_input_exits_1(tmp_path, capsys):
    bad = tmp_path / "i.csv"
    bad.write_text("u1,p1,40,-1\n")
    (tmp_path / "p.csv").write_text("")
    code = main(["ingest", "--interactions", str(bad), "--pages", str(tmp_path / "p.csv"),
                 "--train", TRAIN, "--test", TEST, "--out", str(tmp_path / "w")])
    assert code == 1
    assert "line 1" in capsys.readouterr().err


def test_rank_outputs_and_alpha_zero(work):
    assert main(["rank", "--workdir", str(work), "--alpha", "0"]) == 0
    res = json.loads((work / "rank.json").read_text())
    v = BiadjacencyMatrix.from_dict(json.loads((work / "matrix.json").read_text()))
    m = prune_matrix(rca_matrix(v))
    deg = m.dense().sum(axis=1)
    for u, d in zip(m.user_index, deg):
        assert res["engagement"][u] == pytest.approx(d / deg.mean(), rel=1e-12)
    rows = read_csv(work / "impact.csv")
    assert float(rows[0]["impact_rank"]) == 1.0
    assert "rank" in json.loads((work / "manifest.json").read_text())["commands"]


def test_rank_alpha_one_is_fitness_complexity(work):
    # small enough for the loop oracle: rank a 12-page slice
    v = BiadjacencyMatrix.from_dict(json.loads((work / "matrix.json").read_text()))
    dense = v.dense()[:12, :12]
    m = prune_matrix(BiadjacencyMatrix.from_dense(
        (dense > 0).astype(float), v.user_index[:12], v.page_index[:12], "binary_rca"))
    r = run(m, PopRankConfig(alpha=1.0, max_iterations=200, T_threshold=math.inf))
    _, q = fitness_complexity(m.dense(), 200)
    by_q = sorted(m.page_index, key=lambda p: (q[m.page_index.index(p)], p))
    by_i = sorted(m.page_index, key=lambda p: -r.impact_rank[p])
    assert by_i == by_q


def test_not_converged_exits_3(work, capsys):
    code = main(["rank", "--workdir", str(work), "--max-iterations", "3"])
    assert code == 3
    assert "did not settle" in capsys.readouterr().err


def test_missing_manifest_exits_1(tmp_path):
    assert main(["rank", "--workdir", str(tmp_path)]) == 1


def test_sweep_has_13_rows(work):
    assert main(["sweep", "--workdir", str(work), "--alphas", "-2:1:0.25"]) == 0
    rows = read_csv(work / "mse_curve.csv")
    assert [float(r["alpha"]) for r in rows] == [-2 + 0.25 * k for k in range(13)]
    assert len({r["mse_popularity"] for r in rows}) == 1


def test_predict_and_polarize(work):
    assert main(["predict", "--workdir", str(work)]) == 0
    report = json.loads((work / "predict.json").read_text())
    assert set(report["impact"]) == {"activity_of", "activity_on", "n_users"}
    assert set(report["category_mean_rank"]) <= {"science", "conspiracy", "unknown"}
    assert read_csv(work / "scatter.csv")
    assert main(["polarize", "--workdir", str(work), "--thresholds", "0.2,0.6,1.0"]) == 0
    rows = read_csv(work / "polarization.csv")
    assert [float(r["threshold"]) for r in rows] == [0.2, 0.6, 1.0]


def test_predict_on_monotone_targets_reports_high_r2(dataset, work, tmp_path):
    """Rewrite page posts so the test-window activity is a deterministic
    increasing function of the Impact rank; the fit must be near perfect."""
    assert main(["rank", "--workdir", str(work)]) == 0
    ranks = json.loads((work / "rank.json").read_text())["impact_rank"]
    pages = tmp_path / "pages.csv"
    with open(pages, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["page_id", "month", "posts", "category"])
        for row in read_csv(dataset / "pages.csv"):
            p = row["page_id"]
            posts = row["posts"]
            if p in ranks and int(row["month"]) == 56:
                posts = str(round(10 ** (1 + 3 * ranks[p])) - 1)
            elif int(row["month"]) >= 56:
                posts = "0"
            w.writerow([p, row["month"], posts, row["category"]])
    monotone = tmp_path / "mono"
    args = ingest_args(dataset, monotone)
    args[args.index("--pages") + 1] = str(pages)
    assert main(args) == 0
    assert main(["predict", "--workdir", str(monotone)]) == 0
    fit = json.loads((monotone / "predict.json").read_text())["impact"]["activity_of"]
    assert fit["r_squared"] > 0.999


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "poprank.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()


def test_pipeline_twice_is_byte_identical(dataset, tmp_path):
    trees = []
    for name in ("a", "b"):
        root = tmp_path / name
        shutil.copytree(dataset, root / "data")
        assert main(ingest_args(root / "data", root / "work")) == 0
        assert main(["pipeline", "--workdir", str(root / "work")]) == 0
        trees.append({p.relative_to(root).as_posix(): p.read_bytes()
                      for p in sorted(root.rglob("*")) if p.is_file()})
    assert trees[0].keys() == trees[1].keys()
    assert trees[0] == trees[1]
