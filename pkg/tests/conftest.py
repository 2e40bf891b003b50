import numpy as np
import pytest

from vipnerf.dataset import SceneData, export_dataset, load_dataset, make_preset


@pytest.fixture(scope="session")
def sphere_box():
    """The toy sphere-box scene with a 2-view lateral rig."""
    scene, cams, train_ids, test_ids = make_preset("sphere-box", 2, 4, 64, seed=0)
    return scene, cams, train_ids, test_ids


@pytest.fixture(scope="session")
def sphere_box_dataset(sphere_box, tmp_path_factory) -> SceneData:
    scene, cams, train_ids, test_ids = sphere_box
    out = tmp_path_factory.mktemp("ds")
    export_dataset(scene, cams, train_ids, test_ids, 100, out, seed=0)
    return load_dataset(out)


def finite_difference(f, params, h=1e-5):
    """Central-difference gradient of scalar f() w.r.t. a list of Tensors."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f()
            flat[i] = orig - h
            lo = f()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel_tol=1e-3, abs_floor=1e-7):
    for a, n in zip(analytic, numeric):
        a = np.zeros_like(n) if a is None else a
        denom = np.maximum(np.abs(a) + np.abs(n), abs_floor / rel_tol)
        rel = np.abs(a - n) / denom
        assert np.max(rel) < rel_tol, f"max rel grad error {np.max(rel):.2e}"
