"""Error-constrained dictionary learning on Hankel patches.

Sparse coding is scikit-learn's Gram-based batch OMP with a per-column
squared-error tolerance; the dictionary update is the approximate K-SVD step
(one power iteration per atom) with an exact rank-1 SVD variant for
cross-checking.
"""

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.linear_model import orthogonal_mp_gram

from rirdenoise import rng
from rirdenoise.envelope.schemas import ErrorSchedule
from rirdenoise.exceptions import InputError, SparseCodingError
from rirdenoise.sparsedl.schemas import Dictionary, LearningStats, PatchMatrix, SparseCode

logger = logging.getLogger(__name__)

TOLERANCE_FLOOR = 1e-12
TOLERANCE_SLACK = 1e-12
COHERENCE_LIMIT = 0.999
EARLY_STOP_CHANGE = 1e-3
ARTIFACT_VERSION = 1


def build_patch_matrix(source, window: int) -> PatchMatrix:
    source = np.asarray(source, dtype=np.float64)
    if window < 2:
        raise InputError(f"window must be >= 2, got {window}")
    if window >= source.size:
        raise InputError(f"window {window} must be shorter than the source ({source.size} samples)")
    m = source.size - window
    data = np.lib.stride_tricks.sliding_window_view(source, window)[:m].T
    return PatchMatrix(data=np.ascontiguousarray(data), window=window, source_length=source.size)


# ── Sparse coding ──────────────────────────────────────────────────────────


def within_tolerance(err, tol):
    """err <= tol up to a 1e-12 relative slack for summation-order rounding."""
    return np.asarray(err) <= np.asarray(tol) * (1.0 + TOLERANCE_SLACK)


def _omp_column(
    atoms: np.ndarray,
    gram: np.ndarray,
    y: np.ndarray,
    xy: np.ndarray,
    tol: float,
    limit: int,
) -> tuple[dict[int, float], float]:
    energy = float(y @ y)
    if within_tolerance(energy, tol) or limit == 0:
        return {}, energy
    path = orthogonal_mp_gram(
        gram, xy[:, None], tol=tol, norms_squared=np.array([energy]), return_path=True
    )
    # one column of coefficients per greedy step
    path = np.asarray(path).reshape(gram.shape[0], -1)
    steps = min(path.shape[1], limit)
    if steps == 0:
        return {}, energy

    order: list[int] = []
    for s in range(steps):
        order.extend(int(a) for a in np.flatnonzero(path[:, s]) if a not in order)
    coef = path[order, steps - 1]
    residual = y - atoms[:, order] @ coef
    return {atom: float(c) for atom, c in zip(order, coef)}, float(residual @ residual)


def omp_encode(
    dictionary: Dictionary,
    column,
    tol: float,
    max_support: int | None = None,
) -> tuple[dict[int, float], float]:
    """Greedy OMP with least-squares re-projection on the selected support.

    Returns the code as {atom: coefficient} in selection order and the
    squared residual.
    """
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    atoms = dictionary.atoms
    y = np.asarray(column, dtype=np.float64)
    if y.shape != (atoms.shape[0],):
        raise InputError(f"column has shape {y.shape}, expected ({atoms.shape[0]},)")
    if not (np.all(np.isfinite(y)) and np.isfinite(tol)):
        raise SparseCodingError("OMP received non-finite input")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _omp_column(atoms, atoms.T @ atoms, y, atoms.T @ y, tol, _support_limit(dictionary, max_support))


def _support_limit(dictionary: Dictionary, max_support: int | None) -> int:
    d, k = dictionary.atoms.shape
    return min(max_support or d, d, k)


def _encode_range(
    atoms: np.ndarray,
    gram: np.ndarray,
    patches: PatchMatrix,
    correlations: np.ndarray,
    tolerances: np.ndarray,
    limit: int,
    cols: range,
) -> list[tuple[dict[int, float], float]]:
    return [
        _omp_column(atoms, gram, patches.data[:, j], correlations[:, j], tolerances[j], limit)
        for j in cols
    ]


def encode_all(
    dictionary: Dictionary,
    patches: PatchMatrix,
    tolerances,
    max_support: int | None = None,
    workers: int = 1,
) -> SparseCode:
    """Batch OMP over every column with the Gram matrix computed once per
    dictionary; results are merged in column order, so the code does not
    depend on the worker count."""
    tolerances = np.asarray(tolerances, dtype=np.float64)
    m = patches.columns
    if tolerances.shape != (m,):
        raise InputError(f"expected {m} tolerances, got {tolerances.shape}")
    if dictionary.window != patches.window:
        raise InputError(f"dictionary window {dictionary.window} != patch window {patches.window}")
    if np.any(tolerances <= 0) or not np.all(np.isfinite(tolerances)):
        raise InputError("tolerances must be positive and finite")
    if not np.all(np.isfinite(patches.data)):
        raise SparseCodingError("OMP received non-finite input")

    atoms = dictionary.atoms
    gram = atoms.T @ atoms
    correlations = atoms.T @ patches.data
    limit = _support_limit(dictionary, max_support)

    workers = max(1, min(workers, m))
    bounds = np.linspace(0, m, workers + 1).astype(int)
    chunks = [range(bounds[i], bounds[i + 1]) for i in range(workers)]
    # sklearn warns when a column stops on a linearly dependent atom
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if workers == 1:
            results = _encode_range(atoms, gram, patches, correlations, tolerances, limit, chunks[0])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = pool.map(
                    lambda cols: _encode_range(atoms, gram, patches, correlations, tolerances, limit, cols),
                    chunks,
                )
                results = [item for part in parts for item in part]

    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    residuals = np.empty(m)
    for j, (code, err) in enumerate(results):
        indices.extend(code.keys())
        values.extend(code.values())
        indptr.append(len(indices))
        residuals[j] = err
    activations = sparse.csc_array(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(dictionary.size, m),
    )
    activations.sort_indices()
    return SparseCode(activations=activations, residuals=residuals, met=within_tolerance(residuals, tolerances))


def _code_from_dense(z: np.ndarray, patches: PatchMatrix, atoms: np.ndarray, met: np.ndarray) -> SparseCode:
    residual = patches.data - atoms @ z
    errs = np.einsum("ij,ij->j", residual, residual)
    return SparseCode(activations=sparse.csc_array(z), residuals=errs, met=met)


# ── Dictionary update ──────────────────────────────────────────────────────


def ksvd_step(
    dictionary: Dictionary,
    patches: PatchMatrix,
    code: SparseCode,
    exact_svd: bool = False,
) -> tuple[Dictionary, SparseCode]:
    """One pass of atom updates; returns the new dictionary and the code with
    the touched rows re-fitted. Unused atoms are replaced by the
    worst-reconstructed columns."""
    if code.activations.shape != (dictionary.size, patches.columns):
        raise InputError(
            f"code shape {code.activations.shape} does not match "
            f"{dictionary.size} atoms x {patches.columns} columns"
        )
    a = patches.data
    d = np.array(dictionary.atoms)
    z = code.activations.toarray()

    unused = []
    for j in range(d.shape[1]):
        users = np.nonzero(z[j])[0]
        if users.size == 0:
            unused.append(j)
            continue
        old_atom = d[:, j].copy()
        d[:, j] = 0.0
        error = a[:, users] - d @ z[:, users]
        if exact_svd:
            u, s, vt = np.linalg.svd(error, full_matrices=False)
            atom, row = u[:, 0], s[0] * vt[0]
        else:
            atom = error @ z[j, users]
            norm = np.linalg.norm(atom)
            if norm == 0.0:
                d[:, j] = old_atom
                continue
            atom = atom / norm
            row = error.T @ atom
        d[:, j] = atom
        z[j, users] = row

    if unused:
        residual = a - d @ z
        worst = np.argsort(-np.einsum("ij,ij->j", residual, residual), kind="stable")
        for j, col in zip(unused, worst):
            norm = np.linalg.norm(a[:, col])
            if norm > 0.0:
                d[:, j] = a[:, col] / norm
        logger.debug("Replaced %d unused atoms", len(unused))

    new_dict = Dictionary(atoms=d, trained_iterations=dictionary.trained_iterations)
    # met flags still refer to the coding pass
    return new_dict, _code_from_dense(z, patches, d, code.met)


def ksvd_update(
    dictionary: Dictionary,
    patches: PatchMatrix,
    code: SparseCode,
    exact_svd: bool = False,
) -> Dictionary:
    return ksvd_step(dictionary, patches, code, exact_svd)[0]


def _replace_coherent(atoms: np.ndarray, patches: PatchMatrix, code: SparseCode) -> np.ndarray:
    """Swap out atoms nearly parallel to an earlier atom for the columns the
    current code reconstructs worst."""
    atoms = atoms.copy()
    gram = np.abs(atoms.T @ atoms)
    np.fill_diagonal(gram, 0.0)
    duplicates = [j for j in range(atoms.shape[1]) if np.any(gram[j, :j] > COHERENCE_LIMIT)]
    if not duplicates:
        return atoms
    worst = np.argsort(-code.residuals, kind="stable")
    for j, col in zip(duplicates, worst):
        norm = np.linalg.norm(patches.data[:, col])
        if norm > 0.0:
            atoms[:, j] = patches.data[:, col] / norm
    return atoms


def initial_dictionary(patches: PatchMatrix, k: int, seed: int) -> Dictionary:
    """K distinct patch columns drawn with probability proportional to their
    energy, normalized; nearly parallel picks are skipped and any shortfall
    is filled with random unit atoms."""
    if k < 1:
        raise InputError(f"atom count must be >= 1, got {k}")
    gen = rng.generator(seed, 0)
    energies = patches.column_energies()
    total = energies.sum()
    chosen: list[np.ndarray] = []
    if total > 0:
        nonzero = int(np.count_nonzero(energies))
        order = gen.choice(patches.columns, size=nonzero, replace=False, p=energies / total)
        for col in order:
            atom = patches.data[:, col] / np.sqrt(energies[col])
            if all(abs(atom @ other) <= COHERENCE_LIMIT for other in chosen):
                chosen.append(atom)
            if len(chosen) == k:
                break
    while len(chosen) < k:
        atom = gen.standard_normal(patches.window)
        chosen.append(atom / np.linalg.norm(atom))
    return Dictionary(atoms=np.column_stack(chosen))


def learn(
    patches: PatchMatrix,
    k: int,
    tolerances,
    iterations: int = 20,
    seed: int = 0,
    exact_svd: bool = False,
    workers: int = 1,
) -> tuple[Dictionary, SparseCode]:
    """Alternate OMP coding and K-SVD updates, finishing with a coding pass so
    the returned code is the one the bounds apply to."""
    if iterations < 1:
        raise InputError(f"iterations must be >= 1, got {iterations}")
    tolerances = np.asarray(tolerances, dtype=np.float64)
    if tolerances.shape != (patches.columns,):
        raise InputError(f"expected {patches.columns} tolerances, got {tolerances.shape}")

    dictionary = initial_dictionary(patches, k, seed)
    code = encode_all(dictionary, patches, tolerances, workers=workers)
    previous = (code.total_support(), float(code.residuals.sum()))
    for done in range(1, iterations + 1):
        dictionary, updated = ksvd_step(dictionary, patches, code, exact_svd)
        atoms = _replace_coherent(dictionary.atoms, patches, updated)
        dictionary = Dictionary(atoms=atoms, trained_iterations=done)
        code = encode_all(dictionary, patches, tolerances, workers=workers)

        current = (code.total_support(), float(code.residuals.sum()))
        if _relative_change(previous[0], current[0]) < EARLY_STOP_CHANGE and (
            _relative_change(previous[1], current[1]) < EARLY_STOP_CHANGE
        ):
            break
        previous = current

    unmet = int(np.count_nonzero(~code.met))
    if unmet:
        logger.warning("%d of %d columns could not meet their tolerance", unmet, patches.columns)
    return dictionary, code


def _relative_change(old: float, new: float) -> float:
    if old == new:
        return 0.0
    return abs(new - old) / max(abs(old), abs(new))


# ── Reassembly and tolerances ─────────────────────────────────────────────


def reconstruct_sequence(
    dictionary: Dictionary,
    code: SparseCode,
    source_length: int,
    passthrough,
) -> np.ndarray:
    """Average D @ Z over each anti-diagonal; samples no column covers are
    copied from the passthrough sequence."""
    passthrough = np.asarray(passthrough, dtype=np.float64)
    if passthrough.size != source_length:
        raise InputError(f"passthrough has {passthrough.size} samples, expected {source_length}")
    d = dictionary.window
    m = code.activations.shape[1]
    if m + d != source_length:
        raise InputError(f"{m} columns of window {d} do not tile {source_length} samples")

    estimate = dictionary.atoms @ code.activations.toarray()
    total = np.zeros(source_length)
    count = np.zeros(source_length)
    for i in range(d):
        total[i : i + m] += estimate[i]
        count[i : i + m] += 1.0
    covered = count > 0
    out = passthrough.copy()
    out[covered] = total[covered] / count[covered]
    return out


def column_tolerances(schedule: ErrorSchedule, window: int, column_energies) -> np.ndarray:
    """Relative squared-error tolerance eps[j] * ||A_j||^2, floored at 1e-12."""
    energies = np.asarray(column_energies, dtype=np.float64)
    m = energies.size
    if len(schedule) < m + window:
        raise InputError(f"schedule has {len(schedule)} values, need at least {m + window}")
    return np.maximum(schedule.values[:m] * energies, TOLERANCE_FLOOR)


def learning_stats(
    patches: PatchMatrix, dictionary: Dictionary, code: SparseCode, tolerances
) -> LearningStats:
    tolerances = np.asarray(tolerances, dtype=np.float64)
    energy = float(patches.column_energies().sum())
    return LearningStats(
        iterations=dictionary.trained_iterations,
        columns=patches.columns,
        mean_support=float(code.support_sizes().mean()),
        total_support=code.total_support(),
        residual_mean=float(code.residuals.mean()),
        residual_max=float(code.residuals.max()),
        relative_residual=float(code.residuals.sum() / energy) if energy > 0 else 0.0,
        unmet_columns=int(np.count_nonzero(~within_tolerance(code.residuals, tolerances))),
    )


# ── Artifact ───────────────────────────────────────────────────────────────


def dump_artifact(path: Path, dictionary: Dictionary, code: SparseCode) -> None:
    """Write atoms (row-major, d rows of K) and the code as (column, atom, value) triplets."""
    coo = code.activations.tocoo()
    order = np.lexsort((coo.row, coo.col))
    payload = {
        "artifact_version": ARTIFACT_VERSION,
        "window": dictionary.window,
        "atom_count": dictionary.size,
        "columns": int(code.activations.shape[1]),
        "trained_iterations": dictionary.trained_iterations,
        "atoms": dictionary.atoms.tolist(),
        "code": [[int(coo.col[i]), int(coo.row[i]), float(coo.data[i])] for i in order],
        "residuals": code.residuals.tolist(),
        "met": code.met.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def load_artifact(path: Path) -> tuple[Dictionary, SparseCode]:
    try:
        payload = json.loads(Path(path).read_text())
        dictionary = Dictionary(
            atoms=payload["atoms"], trained_iterations=payload.get("trained_iterations", 0)
        )
        triplets = np.asarray(payload["code"], dtype=np.float64).reshape(-1, 3)
        activations = sparse.csc_array(
            (triplets[:, 2], (triplets[:, 1].astype(int), triplets[:, 0].astype(int))),
            shape=(payload["atom_count"], payload["columns"]),
        )
        code = SparseCode(
            activations=activations,
            residuals=np.asarray(payload["residuals"], dtype=np.float64),
            met=np.asarray(payload["met"], dtype=bool),
        )
    except (OSError, KeyError, ValueError) as e:
        raise InputError(f"Cannot load dictionary artifact {path}: {e}") from e
    return dictionary, code
