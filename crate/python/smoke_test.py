"""Quick end-to-end check of the pyfacexpr bindings."""

import sys
import tempfile
from pathlib import Path

import pyfacexpr as fx


def main():
    assert fx.labels() == [
        "anger", "fear", "surprise", "sadness", "happiness", "disgust", "neutral",
    ], fx.labels()

    face = fx.synth_face("happiness", 3)
    assert (face.width, face.height) == (85, 85)
    assert fx.GrayImage.from_pgm(face.to_pgm()) == face

    edges = fx.canny(face)
    assert set(edges.pixels()) <= {0, 255}
    print("edge pixels:", edges.pixels().count(255))

    pca = fx.PcaModel.fit([[1.0, 2.0], [2.0, 4.1], [3.0, 6.0], [4.0, 8.2]], 1)
    y = pca.project([2.5, 5.0])
    assert len(y) == 1

    net = fx.Mlp([2, 4, 1], seed=1)
    xs = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
    ts = [[0.0], [1.0], [1.0], [0.0]]
    history = net.train(xs, ts, rate=0.3, max_epochs=100_000, target_error=1e-3, seed=1)
    assert history[-1] <= 1e-3, history[-1]
    assert all(abs(net.predict(x)[0] - t[0]) < 0.1 for x, t in zip(xs, ts))
    print("xor epochs:", len(history))

    with tempfile.TemporaryDirectory() as tmp:
        manifest = fx.synth_dataset(str(Path(tmp) / "faces"), per_class=8, seed=7)
        model, acc = fx.train_model(
            str(manifest), hidden=10, rate=0.3, max_epochs=500, per_class_test=2
        )
        assert model.feature_dim == 200
        print(f"test accuracy: {acc:.1f}%")

        path = Path(tmp) / "model.json"
        model.save(str(path))
        loaded = fx.ExpressionModel.load(str(path))
        assert loaded.classify(face) == model.classify(face)
        print("classified as:", loaded.classify(face)[0])

        path.write_text("{")
        try:
            fx.ExpressionModel.load(str(path))
        except fx.FacexprError as e:
            print("corrupt model rejected:", e)
        else:
            raise AssertionError("corrupt model accepted")

    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
