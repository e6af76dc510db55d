import itertools

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import sparse

from rirdenoise.envelope.schemas import ErrorSchedule
from rirdenoise.exceptions import InputError, SparseCodingError
from rirdenoise.sparsedl.schemas import Dictionary, PatchMatrix, SparseCode
from rirdenoise.sparsedl.service import (
    build_patch_matrix,
    column_tolerances,
    dump_artifact,
    encode_all,
    initial_dictionary,
    ksvd_step,
    ksvd_update,
    learn,
    learning_stats,
    load_artifact,
    omp_encode,
    reconstruct_sequence,
)


def _unit_columns(gen: np.random.Generator, d: int, k: int) -> np.ndarray:
    atoms = gen.standard_normal((d, k))
    return atoms / np.linalg.norm(atoms, axis=0)


def _patches(data: np.ndarray) -> PatchMatrix:
    return PatchMatrix(data=data, window=data.shape[0], source_length=data.shape[0] + data.shape[1])


# ── Patch matrix ───────────────────────────────────────────────────────────


def test_patch_matrix_layout():
    patches = build_patch_matrix([1, 2, 3, 4, 5], 2)
    np.testing.assert_array_equal(patches.data, [[1, 2, 3], [2, 3, 4]])
    assert patches.columns == 3
    np.testing.assert_array_equal(patches.column_energies(), [5, 13, 25])


def test_patch_matrix_is_hankel(rng):
    source = rng.standard_normal(50)
    patches = build_patch_matrix(source, 7)
    for i in range(7):
        for j in range(patches.columns):
            assert patches.data[i, j] == source[i + j]


def test_patch_matrix_shapes():
    assert np.all(build_patch_matrix(np.full(20, 3.0), 5).data == 3.0)
    assert build_patch_matrix(np.ones(256), 128).data.shape == (128, 128)
    with pytest.raises(InputError):
        build_patch_matrix(np.ones(4), 4)
    with pytest.raises(InputError):
        build_patch_matrix(np.ones(4), 1)


def test_dictionary_rejects_long_atoms():
    with pytest.raises(ValidationError):
        Dictionary(atoms=[[2.0], [0.0]])
    with pytest.raises(ValidationError):
        Dictionary(atoms=[1.0, 0.0])


# ── OMP ────────────────────────────────────────────────────────────────────


def test_omp_exact_atom(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 8, 5))
    code, err = omp_encode(dictionary, 5.0 * dictionary.atoms[:, 3], tol=1e-12)
    assert list(code) == [3]
    assert code[3] == pytest.approx(5.0)
    assert err < 1e-20


def test_omp_orthonormal_dictionary(rng):
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    dictionary = Dictionary(atoms=q)
    y = rng.standard_normal(8)
    code, err = omp_encode(dictionary, y, tol=1e-20)
    inner = q.T @ y
    expected_order = np.argsort(-np.abs(inner), kind="stable")
    assert list(code)[:4] == expected_order[:4].tolist()
    for atom, value in code.items():
        assert value == pytest.approx(inner[atom], abs=1e-12)


def test_omp_stops_on_tolerance():
    dictionary = Dictionary(atoms=np.eye(3))
    code, err = omp_encode(dictionary, [3.0, 0.1, 0.0], tol=0.02)
    assert list(code) == [0]
    assert code[0] == pytest.approx(3.0)
    assert err == pytest.approx(0.01)
    assert omp_encode(dictionary, [3.0, 0.1, 0.0], tol=10.0) == ({}, pytest.approx(9.01))


def test_omp_respects_max_support(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 8, 12))
    code, _ = omp_encode(dictionary, rng.standard_normal(8), tol=1e-20, max_support=3)
    assert len(code) == 3


def test_omp_rejects_bad_input(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 4, 2))
    with pytest.raises(SparseCodingError):
        omp_encode(dictionary, [1.0, np.nan, 0.0, 0.0], tol=1e-3)
    with pytest.raises(InputError):
        omp_encode(dictionary, [1.0, 0.0, 0.0, 0.0], tol=0.0)
    with pytest.raises(InputError):
        omp_encode(dictionary, [1.0, 0.0], tol=1e-3)


def test_total_support_nonincreasing_in_tolerance(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 8, 16))
    patches = _patches(rng.standard_normal((8, 40)))
    energies = patches.column_energies()
    supports = [
        encode_all(dictionary, patches, scale * energies).total_support()
        for scale in (1e-6, 1e-3, 1e-2, 0.1, 0.5, 1.0)
    ]
    assert supports == sorted(supports, reverse=True)
    assert supports[-1] == 0


def test_tolerance_equal_to_column_energy_gives_empty_code(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 8, 16))
    patches = _patches(rng.standard_normal((8, 40)))
    code = encode_all(dictionary, patches, patches.column_energies())
    assert code.total_support() == 0
    assert np.all(code.met)
    for j in range(patches.columns):
        column = patches.data[:, j]
        assert omp_encode(dictionary, column, float(np.sum(column**2)))[0] == {}


def test_omp_residual_strictly_decreases(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 12, 20))
    for _ in range(20):
        y = rng.standard_normal(12)
        errors = [omp_encode(dictionary, y, 1e-20, max_support=s)[1] for s in range(1, 13)]
        assert all(b < a for a, b in zip(errors, errors[1:]) if a > 1e-20)
        first, _ = omp_encode(dictionary, y, 1e-20, max_support=1)
        longer, _ = omp_encode(dictionary, y, 1e-20, max_support=5)
        assert list(longer)[0] == list(first)[0]


def test_encode_all_rejects_bad_tolerances(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 4, 3))
    patches = _patches(rng.standard_normal((4, 6)))
    with pytest.raises(InputError):
        encode_all(dictionary, patches, np.zeros(6))
    data = patches.data.copy()
    data[0, 0] = np.inf
    with pytest.raises(SparseCodingError):
        encode_all(dictionary, PatchMatrix(data=data, window=4, source_length=10), np.ones(6))


def test_encode_all_is_independent_of_workers(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 8, 6))
    patches = _patches(rng.standard_normal((8, 37)))
    tolerances = 0.05 * patches.column_energies()
    serial = encode_all(dictionary, patches, tolerances, workers=1)
    threaded = encode_all(dictionary, patches, tolerances, workers=4)
    assert (serial.activations != threaded.activations).nnz == 0
    np.testing.assert_array_equal(serial.residuals, threaded.residuals)


def test_silent_column_gets_empty_code(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 4, 3))
    data = rng.standard_normal((4, 5))
    data[:, 2] = 0.0
    patches = _patches(data)
    schedule = ErrorSchedule(values=np.full(9, 1e-4), transition_index=0, nsr=0.0)
    tolerances = column_tolerances(schedule, 4, patches.column_energies())
    assert tolerances[2] == 1e-12
    code = encode_all(dictionary, patches, tolerances)
    assert code.column(2) == {}
    assert code.met[2]


# ── Dictionary update ──────────────────────────────────────────────────────


@pytest.mark.parametrize("exact_svd", [False, True])
def test_ksvd_step_does_not_increase_error(exact_svd):
    gen = np.random.default_rng(5)
    for _ in range(20):
        dictionary = Dictionary(atoms=_unit_columns(gen, 8, 4))
        patches = _patches(gen.standard_normal((8, 16)))
        code = encode_all(dictionary, patches, 0.3 * patches.column_energies())
        updated, refit = ksvd_step(dictionary, patches, code, exact_svd)
        assert refit.residuals.sum() <= code.residuals.sum() * (1 + 1e-12) + 1e-12
        np.testing.assert_allclose(np.linalg.norm(updated.atoms, axis=0), 1.0, atol=1e-12)


def test_ksvd_rank_one_case():
    v = np.array([1.0, 2.0, -2.0])
    patches = _patches(np.tile(v[:, None], (1, 6)))
    dictionary = Dictionary(atoms=[[1.0], [0.0], [0.0]])
    code = SparseCode(
        activations=sparse.csc_array(np.ones((1, 6))), residuals=np.zeros(6), met=np.zeros(6, dtype=bool)
    )
    updated = ksvd_update(dictionary, patches, code)
    np.testing.assert_allclose(updated.atoms[:, 0], v / 3.0)


def test_unused_atom_is_replaced_by_worst_column():
    data = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 3.0]])
    patches = _patches(data)
    dictionary = Dictionary(atoms=np.eye(4)[:, :3])
    z = np.zeros((3, 3))
    z[0, 0], z[1, 1] = 2.0, 1.0
    code = SparseCode(
        activations=sparse.csc_array(z), residuals=np.array([0.0, 0.0, 9.0]), met=np.array([True, True, False])
    )
    updated, refit = ksvd_step(dictionary, patches, code)
    np.testing.assert_allclose(updated.atoms[:, 2], [0.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(updated.atoms[:, :2], np.eye(4)[:, :2])
    np.testing.assert_array_equal(refit.met, code.met)


def test_ksvd_rejects_mismatched_code(rng):
    dictionary = Dictionary(atoms=_unit_columns(rng, 4, 2))
    patches = _patches(rng.standard_normal((4, 5)))
    code = SparseCode(activations=sparse.csc_array((3, 5)), residuals=np.zeros(5), met=np.ones(5, dtype=bool))
    with pytest.raises(InputError):
        ksvd_step(dictionary, patches, code)


# ── Learning ───────────────────────────────────────────────────────────────


def test_initial_dictionary_is_seeded(rng):
    patches = _patches(rng.standard_normal((8, 30)))
    first = initial_dictionary(patches, 5, seed=9)
    again = initial_dictionary(patches, 5, seed=9)
    np.testing.assert_array_equal(first.atoms, again.atoms)
    np.testing.assert_allclose(np.linalg.norm(first.atoms, axis=0), 1.0)


def test_initial_dictionary_fills_silent_patches():
    patches = _patches(np.zeros((4, 6)))
    dictionary = initial_dictionary(patches, 3, seed=1)
    assert dictionary.size == 3
    np.testing.assert_allclose(np.linalg.norm(dictionary.atoms, axis=0), 1.0)


def test_learn_recovers_generating_dictionary():
    gen = np.random.default_rng(21)
    truth = _unit_columns(gen, 16, 4)
    labels = gen.integers(0, 4, size=500)
    scales = gen.uniform(1.0, 2.0, size=500) * gen.choice([-1.0, 1.0], size=500)
    patches = _patches(truth[:, labels] * scales)

    dictionary, code = learn(patches, 4, np.full(500, 1e-8), iterations=10, seed=3)
    overlap = np.abs(truth.T @ dictionary.atoms)
    assert np.all(overlap.max(axis=1) > 0.99)
    assert np.all(code.met)
    assert np.all(code.support_sizes() == 1)


def test_learn_meets_bounds_or_saturates_support():
    gen = np.random.default_rng(8)
    patches = _patches(gen.standard_normal((8, 32)))
    energies = patches.column_energies()
    tolerances = np.where(np.arange(32) % 2 == 0, 0.9, 1e-6) * energies
    dictionary, code = learn(patches, 4, tolerances, iterations=5, seed=0)
    saturated = code.support_sizes() == 4
    assert np.all(code.met | saturated)
    assert code.met.any() and saturated.any()

    stats = learning_stats(patches, dictionary, code, tolerances)
    assert stats.columns == 32
    assert stats.unmet_columns == int(np.count_nonzero(~code.met))


def test_learn_with_single_atom(rng):
    patches = build_patch_matrix(rng.standard_normal(40), 6)
    dictionary, code = learn(patches, 1, 0.5 * patches.column_energies(), iterations=3)
    assert dictionary.atoms.shape == (6, 1)
    assert np.all(code.support_sizes() <= 1)


def test_loose_tolerances_give_empty_code(rng):
    patches = _patches(rng.standard_normal((6, 20)))
    tolerances = np.full(20, patches.column_energies().max())
    _, code = learn(patches, 3, tolerances, iterations=2)
    assert code.total_support() == 0


def test_learn_is_deterministic(rng):
    patches = build_patch_matrix(rng.standard_normal(200), 16)
    tolerances = 0.01 * patches.column_energies()
    d1, z1 = learn(patches, 4, tolerances, iterations=5, seed=17, workers=1)
    d2, z2 = learn(patches, 4, tolerances, iterations=5, seed=17, workers=3)
    np.testing.assert_array_equal(d1.atoms, d2.atoms)
    assert (z1.activations != z2.activations).nnz == 0


def test_learn_validates_arguments(rng):
    patches = _patches(rng.standard_normal((4, 10)))
    with pytest.raises(InputError):
        learn(patches, 2, np.ones(10), iterations=0)
    with pytest.raises(InputError):
        learn(patches, 2, np.ones(9))
    with pytest.raises(InputError):
        learn(patches, 0, np.ones(10))


# ── Reassembly and tolerances ─────────────────────────────────────────────


def _perfect_code(patches: PatchMatrix) -> tuple[Dictionary, SparseCode]:
    m = patches.columns
    code = SparseCode(
        activations=sparse.csc_array(patches.data), residuals=np.zeros(m), met=np.ones(m, dtype=bool)
    )
    return Dictionary(atoms=np.eye(patches.window)), code


def test_reconstruct_roundtrip(rng):
    source = rng.standard_normal(64)
    patches = build_patch_matrix(source, 8)
    dictionary, code = _perfect_code(patches)
    out = reconstruct_sequence(dictionary, code, 64, np.zeros(64))
    assert np.max(np.abs(out[:63] - source[:63])) < 1e-12
    assert out[63] == 0.0


def test_reconstruct_zero_code_keeps_passthrough_tail(rng):
    source = rng.standard_normal(32)
    code = SparseCode(activations=sparse.csc_array((4, 28)), residuals=np.zeros(28), met=np.ones(28, dtype=bool))
    out = reconstruct_sequence(Dictionary(atoms=np.eye(4)), code, 32, source)
    assert np.all(out[:31] == 0.0)
    assert out[31] == source[31]


def test_reconstruct_rejects_bad_shapes():
    code = SparseCode(activations=sparse.csc_array((4, 28)), residuals=np.zeros(28), met=np.ones(28, dtype=bool))
    with pytest.raises(InputError):
        reconstruct_sequence(Dictionary(atoms=np.eye(4)), code, 33, np.zeros(33))
    with pytest.raises(InputError):
        reconstruct_sequence(Dictionary(atoms=np.eye(4)), code, 32, np.zeros(30))


def test_column_tolerances():
    values = np.full(10, 1e-4)
    values[6:] = 0.39
    schedule = ErrorSchedule(values=values, transition_index=5, nsr=0.1)
    tolerances = column_tolerances(schedule, 2, [1.0, 0.0, 2.0, 1.0, 1.0, 1.0, 0.5, 1.0])
    assert tolerances[0] == 1e-4
    assert tolerances[1] == 1e-12
    assert tolerances[2] == 2e-4
    assert tolerances[6] == pytest.approx(0.195)
    with pytest.raises(InputError):
        column_tolerances(schedule, 4, np.ones(8))


def test_artifact_roundtrip(tmp_path, rng):
    patches = build_patch_matrix(rng.standard_normal(100), 8)
    dictionary, code = learn(patches, 3, 0.05 * patches.column_energies(), iterations=2)
    path = tmp_path / "dictionary.json"
    dump_artifact(path, dictionary, code)

    loaded_dict, loaded_code = load_artifact(path)
    np.testing.assert_array_equal(loaded_dict.atoms, dictionary.atoms)
    assert loaded_dict.trained_iterations == dictionary.trained_iterations
    np.testing.assert_array_equal(loaded_code.activations.toarray(), code.activations.toarray())
    np.testing.assert_array_equal(loaded_code.met, code.met)


def test_load_artifact_reports_broken_files(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InputError):
        load_artifact(path)
    with pytest.raises(InputError):
        load_artifact(tmp_path / "missing.json")


# ── Randomized checks ──────────────────────────────────────────────────────


def test_omp_bound_on_random_instances():
    gen = np.random.default_rng(2024)
    for _ in range(1000):
        d = int(gen.integers(2, 17))
        k = int(gen.integers(1, 2 * d + 1))
        dictionary = Dictionary(atoms=_unit_columns(gen, d, k))
        y = gen.standard_normal(d)
        tol = float(gen.uniform(1e-6, 1.0)) * float(y @ y)
        code, err = omp_encode(dictionary, y, tol)
        assert err <= tol or len(code) == min(d, k)
        if code:
            atoms = dictionary.atoms[:, list(code)]
            residual = y - atoms @ np.array(list(code.values()))
            assert float(residual @ residual) == pytest.approx(err, rel=1e-9, abs=1e-12)


def test_omp_is_close_to_best_support():
    gen = np.random.default_rng(99)
    for _ in range(100):
        d, k = 8, 12
        atoms = _unit_columns(gen, d, k)
        y = gen.standard_normal(d)
        code, err = omp_encode(Dictionary(atoms=atoms), y, float(gen.uniform(0.2, 0.9)) * float(y @ y))
        size = len(code)
        if size == 0:
            continue
        best = min(
            float(np.sum((y - atoms[:, list(s)] @ np.linalg.lstsq(atoms[:, list(s)], y, rcond=None)[0]) ** 2))
            for s in itertools.combinations(range(k), size)
        )
        assert err <= 10.0 * best + 1e-12


def test_dictionary_recovery_over_seeds():
    recovered = 0
    for seed in range(20):
        gen = np.random.default_rng(1000 + seed)
        truth = _unit_columns(gen, 16, 4)
        labels = gen.integers(0, 4, size=500)
        scales = gen.uniform(1.0, 2.0, size=500) * gen.choice([-1.0, 1.0], size=500)
        dictionary, _ = learn(_patches(truth[:, labels] * scales), 4, np.full(500, 1e-8), iterations=10, seed=seed)
        recovered += bool(np.all(np.abs(truth.T @ dictionary.atoms).max(axis=1) > 0.99))
    assert recovered >= 18
