"""Export the fixture ONNX checkpoints used by the adapter tests.

Both models are small fixed-weight convolutional networks — deterministic
feature extractors, not trained networks. They exist so the adapter's
pre/post-processing, frame mapping, and CSV contract can be exercised
end to end against real ONNX Runtime sessions.

detector_based.onnx
    image [1, 1, H, W] float32 (grayscale, [0, 1])
      -> scores      [1, 1, H, W]        difference-of-Gaussians response
      -> descriptors [1, 64, H/8, W/8]   stride-8 encoder activations

detector_free.onnx
    image0, image1 [1, 1, 256, 256] float32
      -> features0, features1 [1, 64, 32, 32]   shared siamese encoder

Usage: python3 export_checkpoints.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

import onnx_minimal as om


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    one_d = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(one_d, one_d)
    return (kernel / kernel.sum()).astype(np.float32)


def encoder_weights(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Zero-mean, unit-norm random filters (deterministic given the rng)."""
    weights = rng.standard_normal(shape)
    weights -= weights.mean(axis=(1, 2, 3), keepdims=True)
    weights /= np.linalg.norm(weights.reshape(shape[0], -1), axis=1).reshape(
        -1, 1, 1, 1
    )
    return weights.astype(np.float32)


def build_weights() -> dict:
    rng = np.random.default_rng(1234)
    return {
        "dog_narrow": gaussian_kernel(9, 1.0).reshape(1, 1, 9, 9),
        "dog_wide": gaussian_kernel(9, 2.5).reshape(1, 1, 9, 9),
        "dog_smooth": gaussian_kernel(5, 1.0).reshape(1, 1, 5, 5),
        "enc1": encoder_weights(rng, (32, 1, 8, 8)),
        "enc2": encoder_weights(rng, (64, 32, 3, 3)),
    }


def encoder_nodes(image: str, prefix: str, output: str) -> list:
    """Conv(k8 s4 p2) -> Tanh -> Conv(k3 s2 p1) -> Tanh; stride 8 overall."""
    return [
        om.conv(image, "enc1", f"{prefix}_c1", strides=(4, 4), pads=(2, 2, 2, 2), kernel=(8, 8)),
        om.node("Tanh", [f"{prefix}_c1"], [f"{prefix}_t1"]),
        om.conv(f"{prefix}_t1", "enc2", f"{prefix}_c2", strides=(2, 2), pads=(1, 1, 1, 1), kernel=(3, 3)),
        om.node("Tanh", [f"{prefix}_c2"], [output]),
    ]


def detector_based_model(weights: dict) -> bytes:
    nodes = [
        om.conv("image", "dog_narrow", "narrow", pads=(4, 4, 4, 4), kernel=(9, 9)),
        om.conv("image", "dog_wide", "wide", pads=(4, 4, 4, 4), kernel=(9, 9)),
        om.node("Sub", ["narrow", "wide"], ["dog"]),
        om.node("Abs", ["dog"], ["dog_mag"]),
        om.conv("dog_mag", "dog_smooth", "scores", pads=(2, 2, 2, 2), kernel=(5, 5)),
        *encoder_nodes("image", "enc", "descriptors"),
    ]
    initializers = [
        om.tensor(name, weights[name])
        for name in ("dog_narrow", "dog_wide", "dog_smooth", "enc1", "enc2")
    ]
    graph = om.graph(
        "detector_based",
        nodes,
        inputs=[om.value_info("image", (1, 1, "height", "width"))],
        outputs=[
            om.value_info("scores", (1, 1, "height", "width")),
            om.value_info("descriptors", (1, 64, "grid_height", "grid_width")),
        ],
        initializers=initializers,
    )
    return om.model(graph)


def detector_free_model(weights: dict) -> bytes:
    nodes = [
        *encoder_nodes("image0", "left", "features0"),
        *encoder_nodes("image1", "right", "features1"),
    ]
    initializers = [om.tensor(name, weights[name]) for name in ("enc1", "enc2")]
    graph = om.graph(
        "detector_free",
        nodes,
        inputs=[
            om.value_info("image0", (1, 1, 256, 256)),
            om.value_info("image1", (1, 1, 256, 256)),
        ],
        outputs=[
            om.value_info("features0", (1, 64, 32, 32)),
            om.value_info("features1", (1, 64, 32, 32)),
        ],
        initializers=initializers,
    )
    return om.model(graph)


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "checkpoints"
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = build_weights()
    for name, blob in (
        ("detector_based.onnx", detector_based_model(weights)),
        ("detector_free.onnx", detector_free_model(weights)),
    ):
        path = out_dir / name
        path.write_bytes(blob)
        print(f"wrote {path} ({len(blob)} bytes)")


if __name__ == "__main__":
    main()
