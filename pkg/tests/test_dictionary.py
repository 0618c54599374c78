import math
import os

import numpy as np
import pytest

from elastomatch import dictionary as dic
from elastomatch.dictionary import (
    DictionaryStore,
    DirectionCap,
    build_entry,
    config_hash,
    solver_config,
    test_field_sp,
    test_field_ss,
)
from elastomatch.errors import ConfigError, CoverageError
from elastomatch.forward import Discretization
from elastomatch.geometry import build_dictionary_shapes
from elastomatch.material import ElasticMaterial

D = (1.0, 0.0, 0.0)
P = (0.0, 1 / math.sqrt(2), 1 / math.sqrt(2))
DISC = Discretization(panel_budget=96, voxel_budget=64)


@pytest.fixture(scope="module")
def mat():
    return ElasticMaterial.from_engineering(20.0, 3.0, 0.475)


@pytest.fixture(scope="module")
def shapes():
    return build_dictionary_shapes()


@pytest.fixture(scope="module")
def entry(mat, shapes):
    return build_entry(shapes[0], "rigid", mat, D, P, disc=DISC)


def _config(mat, kind="rigid"):
    return solver_config(kind, mat, DISC, 2.0, 0.25)


# ---------------------------------------------------------------- the cap


def test_cap_directions():
    cap = DirectionCap((-1.0, 0.0, 0.0), 2.0, 0.25)
    dirs = cap.directions()
    assert cap.n_side == 17
    assert dirs.shape == (17 * 17, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, rtol=1e-15)
    np.testing.assert_allclose(dirs[len(dirs) // 2], cap.axis, atol=1e-15)
    # spacing stays within the configured step along each tangent axis
    step = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", dirs[:-1], dirs[1:]), -1, 1)))
    assert step[:16].max() <= 0.25 + 1e-9
    frame = cap.frame()
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(frame) == pytest.approx(1.0)


def test_cap_interpolation_reproduces_nodes_and_linear_data(rng):
    cap = DirectionCap((0.6, 0.0, -0.8), 2.0, 0.5)
    dirs = cap.directions()
    values = rng.normal(size=(len(dirs), 3)) + 1j * rng.normal(size=(len(dirs), 3))
    np.testing.assert_allclose(cap.interpolate(values, dirs), values, rtol=1e-12, atol=1e-12)
    # data linear in the gnomonic angles are blended exactly
    a, e1, e2 = cap.frame()
    ang = lambda x: np.stack([np.arctan((x @ e1) / (x @ a)), np.arctan((x @ e2) / (x @ a))], axis=-1)
    coef = np.array([[1.0, -2.0, 0.5], [0.3, 0.0, 4.0]])
    q = dirs[:40] + 1e-3 * rng.normal(size=(40, 3))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q = q[np.all(np.abs(np.degrees(ang(q))) < 1.9, axis=1)]
    np.testing.assert_allclose(cap.interpolate(ang(dirs) @ coef, q), ang(q) @ coef, rtol=1e-9, atol=1e-12)


def test_cap_rejects_uncovered_directions():
    cap = DirectionCap((-1.0, 0.0, 0.0), 2.0, 0.25)
    with pytest.raises(CoverageError):
        cap.locate([[1.0, 0.0, 0.0]])
    off = np.array([-1.0, math.tan(math.radians(3.0)), 0.0])
    with pytest.raises(CoverageError):
        cap.locate(off / np.linalg.norm(off))
    with pytest.raises(ValueError):
        DirectionCap((2.0, 0.0, 0.0))


# ------------------------------------------------------------------ entries


def test_rigid_entry_is_tangential_and_location_free(entry):
    assert entry.far_field.dtype == np.complex64
    dirs = entry.cap.directions()
    radial = np.abs(np.einsum("ni,ni->n", dirs, entry.far_field.astype(complex)))
    # single-precision storage bounds the tangentiality
    assert radial.max() <= 1e-6 * np.abs(entry.far_field).max()
    np.testing.assert_allclose(entry.cap.axis, [-1.0, 0.0, 0.0])
    assert entry.key() == (1, "rigid", D, P)


def test_medium_entry_with_zero_contrast_vanishes(mat, shapes):
    disc = Discretization(voxel_budget=64, inside_value=0.0)
    e = build_entry(shapes[1], "medium", mat, D, P, disc=disc)
    assert not e.far_field.any()


def test_rebuild_is_byte_identical(mat, shapes, entry, tmp_path):
    again = build_entry(shapes[0], "rigid", mat, D, P, disc=DISC)
    assert again.far_field.tobytes() == entry.far_field.tobytes()
    for name, e in (("a", entry), ("b", again)):
        store = DictionaryStore(_config(mat))
        store.add(e, _config(mat))
        store.save(tmp_path / name)
    for f in sorted(os.listdir(tmp_path / "a")):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_test_fields(entry, mat):
    z = np.array([40.0, 0.1, -0.1])
    x = np.array([[0.0, 0.2, 0.3], [0.0, -0.4, 0.1]])
    sp, ss = test_field_sp(entry, z, x), test_field_ss(entry, z, x)
    r = np.linalg.norm(x - z, axis=1)
    far = entry.far_field_at((x - z) / r[:, None])
    pre = np.exp(1j * mat.k_s * np.linalg.norm(z)) / (4 * math.pi * np.linalg.norm(z))
    np.testing.assert_allclose(sp, pre * (np.exp(1j * mat.k_p * r) / r)[:, None] * far, rtol=1e-13)
    np.testing.assert_allclose(ss, pre * (np.exp(1j * mat.k_s * r) / r)[:, None] * far, rtol=1e-13)
    # magnitude scales like 1/(|z| |x - z|)
    np.testing.assert_allclose(np.abs(ss), np.abs(pre) / r[:, None] * np.abs(far), rtol=1e-13)
    with pytest.raises(ValueError):
        test_field_sp(entry, z, z[None])
    with pytest.raises(CoverageError):
        test_field_ss(entry, -z, x)


def test_pressure_phase_periodicity(entry, mat):
    # moving x one pressure wavelength further from z (and rescaling the
    # amplitude) leaves the phase unchanged
    z = np.array([40.0, 0.0, 0.0])
    x = np.array([0.0, 0.1, 0.2])
    u = (x - z) / np.linalg.norm(x - z)
    x2 = x + 2 * math.pi / mat.k_p * u
    a, b = test_field_sp(entry, z, x[None])[0], test_field_sp(entry, z, x2[None])[0]
    ratio = np.linalg.norm(x2 - z) / np.linalg.norm(x - z)
    np.testing.assert_allclose(b * ratio, a, rtol=1e-9)


# -------------------------------------------------------------------- store


def test_store_round_trip_is_bit_exact(mat, entry, tmp_path):
    store = DictionaryStore(_config(mat))
    store.add(entry, _config(mat))
    store.save(tmp_path / "s")
    loaded = DictionaryStore.load(tmp_path / "s")
    assert loaded.hash == store.hash
    assert loaded.material == mat
    assert loaded.shape_ids() == [1]
    assert loaded.entries[0].far_field.tobytes() == entry.far_field.tobytes()
    assert loaded.entries[0].key() == entry.key()
    loaded.save(tmp_path / "t")
    for f in sorted(os.listdir(tmp_path / "s")):
        assert (tmp_path / "s" / f).read_bytes() == (tmp_path / "t" / f).read_bytes()
    raw = (tmp_path / "s" / "rigid_shape1_0000.bin").read_bytes()
    assert len(raw) == 8 * 3 * entry.far_field.shape[0]
    assert DictionaryStore.stored_hash(tmp_path / "s") == store.hash
    assert DictionaryStore.stored_hash(tmp_path / "missing") is None


def test_store_rejects_foreign_and_duplicate_entries(mat, entry):
    store = DictionaryStore(_config(mat))
    with pytest.raises(ConfigError):
        store.add(entry, _config(mat.with_omega(10.0)))
    store.add(entry, _config(mat))
    with pytest.raises(ValueError):
        store.add(entry, _config(mat))


def test_store_lookup(mat, entry):
    store = DictionaryStore(_config(mat))
    store.add(entry, _config(mat))
    near = np.array([1.0, math.tan(math.radians(0.3)), 0.0])
    assert store.find(1, near, P) is entry
    far = np.array([1.0, math.tan(math.radians(0.8)), 0.0])
    with pytest.raises(CoverageError):
        store.find(1, far, P)
    with pytest.raises(CoverageError):
        store.find(2, D, P)
    with pytest.raises(CoverageError):
        store.find(1, D, (0.0, 0.0, 1.0))


def test_corrupt_store_is_rejected(mat, entry, tmp_path):
    store = DictionaryStore(_config(mat))
    store.add(entry, _config(mat))
    store.save(tmp_path)
    f = tmp_path / "rigid_shape1_0000.bin"
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(ConfigError):
        DictionaryStore.load(tmp_path)


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


def test_solver_config_distinguishes_kinds(mat):
    assert config_hash(_config(mat, "rigid")) != config_hash(_config(mat, "medium"))
    with pytest.raises(ValueError):
        _config(mat, "fluid")


def test_entries_do_not_depend_on_location():
    names = {f.name for f in dic.DictionaryEntry.__dataclass_fields__.values()}
    assert not names & {"z", "z0", "location", "offset"}
