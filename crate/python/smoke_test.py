"""Smoke test for the flowsieve Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
Then run:                  python python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import flowsieve as fs


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    check(abs(fs.pearson(x, [2.0, 4.0, 6.0, 8.0, 10.0]) - 1.0) < 1e-12, "pearson of a linear pair is 1")
    check(abs(fs.spearman(x, [1.0, 4.0, 9.0, 16.0, 25.0]) - 1.0) < 1e-12, "spearman of a monotone pair is 1")
    check(abs(fs.kendall_tau_b([1, 2, 2, 3], [1, 3, 2, 3]) - 0.8) < 1e-12, "kendall tau-b with ties")
    check(fs.pearson([1.0, 1.0, 1.0], [0.0, 1.0, 0.0]) is None, "constant column has no correlation")
    check(abs(fs.information_gain([0, 0, 1, 1], [0, 0, 1, 1], 2) - 1.0) < 1e-12, "perfect split has 1 bit")

    data, informative, noise = fs.synth(rows=3000, informative=3, noise=5, seed=7)
    check(data.n_rows == 3000 and data.n_features == 8, f"synth shape {data!r}")

    scaled = fs.fit_scaler(data).transform(data)
    trace = fs.select(scaled)
    check(sorted(trace.a6) == sorted(informative), f"selection keeps the informative features {trace.a6}")
    check(set(trace.a4) == set(trace.a1) | set(trace.a3), "a4 = a1 | a3")

    view = scaled.select_features(trace.a6)
    train, test = fs.stratified_split(view, 0.3, seed=1)
    for kind, params in [("tree", {}), ("forest", {"n_trees": 25}), ("gbdt", {"rounds": 40}), ("knn", {"k": 5})]:
        model = fs.train(train, kind, seed=1, **params)
        labels, scores = model.predict(test)
        m = fs.metrics(labels, test.y)
        check(m["accuracy"] >= 0.99, f"{kind} held-out accuracy {m['accuracy']:.4f}")
        check(all(0.0 <= s <= 1.0 for s in scores), f"{kind} scores are probabilities")
        again = fs.Model.from_json(model.to_json())
        check(again.predict(test) == (labels, scores), f"{kind} survives a JSON round trip")

    gbdt = fs.train(train, "gbdt", seed=1, rounds=40)
    ranking = gbdt.feature_importance(view.feature_names)
    check(math.isclose(sum(r[2] for r in ranking), 1.0), "normalized importance sums to 1")

    folds = fs.kfold_cv(view, k=5, kind="tree", seed=3)
    check(len(folds) == 5 and min(folds) > 0.98, f"5-fold accuracies {folds}")

    m = fs.metrics_from_counts(tp=5, tn=3, fp=1, fn_=1)
    check(abs(m["recall_weighted"] - m["accuracy"]) < 1e-12, "weighted recall equals accuracy")

    try:
        fs.train(train, "svm")
    except fs.FlowsieveError as e:
        check("svm" in str(e), "unknown model kind raises FlowsieveError")
    else:
        raise SystemExit("FAIL: unknown model kind accepted")

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "run"
        cfg = {"synth": {"n_rows": 1500, "seed": 2}, "seed": 9, "output_dir": str(out), "model": {"kind": "tree"}}
        summary = fs.run_pipeline(json.dumps(cfg))
        check(summary["accuracy"] > 0.99, f"pipeline accuracy {summary['accuracy']:.4f}")
        eval_json = json.loads((out / "eval.json").read_text())
        check(eval_json["config_hash"] == summary["config_hash"], "artifacts carry the config hash")

        csv = Path(tmp) / "flows.csv"
        data.to_csv(str(csv))
        back = fs.Dataset.from_csv([str(csv)])
        check(back.n_rows == data.n_rows and back.y == data.y, "CSV export reads back")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
