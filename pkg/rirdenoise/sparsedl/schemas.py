import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import sparse

ATOM_NORM_TOLERANCE = 1e-10


class PatchMatrix(BaseModel):
    """Hankel matrix of length-d windows; column j starts at source sample j."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    window: int = Field(ge=2)
    source_length: int

    @model_validator(mode="after")
    def _check_shape(self) -> "PatchMatrix":
        expected = (self.window, self.source_length - self.window)
        if self.data.shape != expected:
            raise ValueError(f"patch matrix shape {self.data.shape}, expected {expected}")
        if expected[1] < 1:
            raise ValueError("source must be longer than the window")
        return self

    @property
    def columns(self) -> int:
        return self.data.shape[1]

    def column_energies(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.data, self.data)


class Dictionary(BaseModel):
    """Atoms as the columns of a d x K matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    atoms: np.ndarray
    trained_iterations: int = 0

    @field_validator("atoms", mode="before")
    @classmethod
    def _atoms(cls, value) -> np.ndarray:
        arr = np.array(value, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"atoms must be a d x K matrix with K >= 1, got shape {arr.shape}")
        norms = np.linalg.norm(arr, axis=0)
        if np.any(norms > 1.0 + ATOM_NORM_TOLERANCE):
            raise ValueError(f"atom norms must be <= 1, largest is {norms.max():.12f}")
        arr.setflags(write=False)
        return arr

    @property
    def window(self) -> int:
        return self.atoms.shape[0]

    @property
    def size(self) -> int:
        return self.atoms.shape[1]


class SparseCode(BaseModel):
    """K x M activations in compressed-column form, with the squared residual
    of every column and whether it met its tolerance."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    activations: sparse.csc_array
    residuals: np.ndarray
    met: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "SparseCode":
        columns = self.activations.shape[1]
        if self.residuals.shape != (columns,) or self.met.shape != (columns,):
            raise ValueError("residuals and met flags need one entry per column")
        return self

    def support_sizes(self) -> np.ndarray:
        return np.diff(self.activations.indptr)

    def total_support(self) -> int:
        return int(self.activations.nnz)

    def usage(self) -> np.ndarray:
        """Number of columns using each atom."""
        return np.bincount(self.activations.indices, minlength=self.activations.shape[0])

    def column(self, j: int) -> dict[int, float]:
        start, stop = self.activations.indptr[j], self.activations.indptr[j + 1]
        return dict(zip(self.activations.indices[start:stop].tolist(),
                        self.activations.data[start:stop].tolist()))


class LearningStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int
    columns: int
    mean_support: float
    total_support: int
    residual_mean: float
    residual_max: float
    relative_residual: float
    unmet_columns: int
