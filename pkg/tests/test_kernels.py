import os
import subprocess
import sys
import tempfile

import numpy as np
from hypothesis import given, settings, strategies as st

from haarface import _kernels, cli
from haarface.cascade import toy_cascade_bytes

_TMP = tempfile.mkdtemp()
CASCADE = os.path.join(_TMP, "toy.xml")
with open(CASCADE, "wb") as _fh:
    _fh.write(toy_cascade_bytes())


def _backend_with(env_extra):
    env = dict(os.environ, **env_extra)
    out = subprocess.run([sys.executable, "-c", "import haarface; print(haarface.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


def test_env_forces_python_fallback():
    assert _backend_with({"HAARFACE_PURE_PYTHON": "1"}) == "python"


def test_default_backend_prefers_compiled():
    want = "cython" if "cython" in _kernels.available else "python"
    assert _backend_with({"HAARFACE_PURE_PYTHON": ""}) == want


@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=200))
def test_cli_never_crashes_on_garbage_images(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("fuzz") / "in.pgm"
    path.write_bytes(data)
    assert cli.main(["detect", str(path), "--cascade", CASCADE]) in {0, 3, 5}


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_cli_detect_on_random_valid_images(w, h, seed):
    px = np.random.default_rng(seed).integers(0, 256, (h, w), dtype=np.uint8)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "in.pgm")
        with open(path, "wb") as fh:
            fh.write(b"P5 %d %d 255\n" % (w, h) + px.tobytes())
        assert cli.main(["detect", path, "--cascade", CASCADE]) in {0, 3}
