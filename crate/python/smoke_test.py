"""Exercises the bsg extension module end to end on a tiny dataset.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/bsg-*.whl
"""

import json
import math
import tempfile
from pathlib import Path

import bsg


def main():
    catalog = bsg.Catalog()
    assert len(catalog) == len(catalog.labels) > 0
    assert len(catalog.fingerprint) == 64

    assert bsg.wasserstein_1d([1, 0, 0, 0], [0, 0, 0, 1]) == 3.0
    assert bsg.energy_distance([0.5, 0.5], [0.5, 0.5]) == 0.0

    data = bsg.Dataset.synthetic(24, partials=2, seed=11)
    again = bsg.Dataset.synthetic(24, partials=2, seed=11)
    assert data.sizes() == {"train": 19, "val": 2, "test": 3}, data.sizes()
    assert data.ground_truth("test", 0) == again.ground_truth("test", 0)

    truth = data.ground_truth("train", 0)
    partial = data.partial("train", 0, k=1)
    assert partial.object_count < truth.object_count
    assert truth.validate() == []
    assert bsg.SceneGraph.from_json(truth.to_json()) == truth

    with tempfile.TemporaryDirectory() as tmp:
        data.save(Path(tmp, "data"))
        loaded = bsg.Dataset.load(Path(tmp, "data"))
        assert loaded.ids("test") == data.ids("test")

        model = bsg.Model.train(data, {"epochs": 15, "hidden": 8, "seed": 2})
        log = model.log
        assert len(log["epochs"]) == 15
        assert log["best_epoch"] is not None
        model.save(Path(tmp, "model.bsgc"))
        reloaded = bsg.Model.load(Path(tmp, "model.bsgc"), catalog)
        assert reloaded.fingerprint == model.fingerprint
        assert reloaded.predict(partial) == model.predict(partial)

    belief = bsg.build_bsg(partial, model)
    assert belief.blind_count == belief.graph.blind_count
    assert belief.strip_blind() == partial
    room = partial.room_ids()[0]
    top = belief.top_k(room, 3)
    assert len(top) <= 3 and all(0 <= share <= 100 for _, share in top)
    assert json.loads(belief.to_json())["schema"] == "bsg-belief/1"

    oracle = bsg.evaluate(data, "oracle")
    assert oracle["wasserstein"]["mean"] == 0.0 and oracle["frobenius"] == 0.0
    report = bsg.evaluate(data, model, grouping="rooms")
    assert math.isfinite(report["wasserstein"]["mean"])

    result = bsg.search(data, model, {"runs_per_graph": 2, "modes": ["single"]}, max_graphs=2)
    assert [m["mode"] for m in result["modes"]] == ["single"]
    assert len(result["episodes"]) == 8

    try:
        bsg.Model.train(data, {"epochs": 5, "learning_rate": 1e300})
    except bsg.NumericError:
        pass
    else:
        raise AssertionError("expected NumericError")
    try:
        bsg.Model.train(data, {"epochs": 5, "bogus": 1})
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
