"""The compiled and pure-Python kernels must agree bit for bit."""

import filecmp
import os
import subprocess
import sys

import numpy as np
import pytest

from lesionbench import _backend, _pykernels

ck = _backend.available_backends().get("cython")
pytestmark = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


@pytest.mark.parametrize("density", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_agrees(density, connectivity):
    g = np.random.default_rng(int(density * 100) + connectivity)
    for shape in [(1, 1), (1, 37), (37, 1), (64, 48)]:
        img = (g.random(shape) < density).astype(np.uint8)
        a, na = ck.label(img, connectivity)
        b, nb = _pykernels.label(img, connectivity)
        assert na == nb
        assert np.array_equal(a, b)


def test_component_table_agrees():
    g = np.random.default_rng(5)
    img = (g.random((80, 80)) < 0.45).astype(np.uint8)
    labels, n = ck.label(img, 8)
    for x, y in zip(ck.component_table(labels, n), _pykernels.component_table(labels, n)):
        assert np.array_equal(x, y)


def test_component_table_empty():
    labels = np.zeros((4, 4), np.int32)
    for mod in (ck, _pykernels):
        area, bbox, perim = mod.component_table(labels, 0)
        assert area.shape == (0,) and bbox.shape == (0, 4) and perim.shape == (0,)


def test_correlate_rows_bit_identical():
    g = np.random.default_rng(9)
    padded = g.random((50, 70))
    k = g.random(13)
    assert ck.correlate_rows(padded, k, 58).tobytes() == _pykernels.correlate_rows(padded, k, 58).tobytes()


def test_trace_perimeter_agrees():
    img = np.zeros((6, 6), np.int32)
    img[1:5, 2] = 3
    img[4, 1:5] = 3
    assert ck.trace_perimeter(img, 3, 1, 2, 7) == _pykernels.trace_perimeter(img, 3, 1, 2, 7)


def _run(args, env_extra, cwd):
    env = dict(os.environ, **env_extra)
    return subprocess.run([sys.executable, *args], capture_output=True, text=True, env=env, cwd=cwd)


def test_env_forces_fallback(tmp_path):
    code = "from lesionbench import BACKEND; print(BACKEND)"
    assert _run(["-c", code], {"LESIONBENCH_PURE": "1"}, tmp_path).stdout.strip() == "python"
    assert _run(["-c", code], {"LESIONBENCH_PURE": "0"}, tmp_path).stdout.strip() == "cython"


def test_backends_build_identical_datasets(tmp_path):
    args = ["-m", "lesionbench", "generate", "--phantom", "2", "--num-images", "4", "--seed", "3", "--out"]
    for name, flag in (("py", "1"), ("c", "0")):
        assert _run([*args, str(tmp_path / name)], {"LESIONBENCH_PURE": flag}, tmp_path).returncode == 0
    for rel in ["manifest.csv", "lesions.csv", "config.json", "images/00003.png", "masks/00002.png"]:
        assert filecmp.cmp(tmp_path / "py" / rel, tmp_path / "c" / rel, shallow=False)
