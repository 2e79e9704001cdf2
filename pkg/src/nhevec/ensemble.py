"""Random matrix ensembles with counter-based seeding.

Every matrix is a pure function of ``(master_seed, sample_index)``: the
stream for a sample is derived by hashing both into a ``SeedSequence`` that
feeds a Philox counter generator, so parallel sweeps do not depend on the
order in which workers pick up indices.
"""

import struct
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "FAMILIES",
    "EnsembleSpec",
    "derive_stream",
    "sample_iid",
    "gaussian_divisible",
    "sample_pair",
    "ginibre",
    "write_cmat",
    "read_cmat",
]

FAMILIES = ("ginibre-complex", "bernoulli-complex", "uniform-phase")

# sub-stream tags inside one sample index
_STREAM_BASE = 0
_STREAM_GAUSS = 1

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EnsembleSpec:
    """Law of an ``N x N`` i.i.d. matrix with entry variance ``1/N``.

    ``t > 0`` adds an independent Ginibre component, ``A + sqrt(t) B``,
    optionally rescaled by ``(1 + t)**-0.5``.
    """

    family: str = "ginibre-complex"
    dim: int = 64
    master_seed: int = 0
    t: float = 0.0
    normalize_1plust: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.t < 0:
            raise ValueError("t must be nonnegative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def derive_stream(master_seed, sample_index, *tags):
    """Independent generator for ``(master_seed, sample_index, *tags)``.

    Pure function of its inputs; distinct indices give statistically
    independent streams.
    """
    key = tuple(int(k) for k in (sample_index, *tags))
    if any(k < 0 for k in key):
        raise ValueError("sample index and tags must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(master_seed) & _MASK64, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple):
        return derive_stream(*seed)
    return derive_stream(int(seed), 0)


def ginibre(n, rng):
    """Complex Ginibre matrix with ``E|B_ij|^2 = 1/n``."""
    scale = 1.0 / np.sqrt(2.0 * n)
    re = rng.standard_normal((n, n))
    im = rng.standard_normal((n, n))
    return (re + 1j * im) * scale


def _draw(family, n, rng):
    if family == "ginibre-complex":
        return ginibre(n, rng)
    if family == "bernoulli-complex":
        # uniform on {1, i, -1, -i}
        k = rng.integers(0, 4, size=(n, n))
        return (1j**k).astype(np.complex128) / np.sqrt(n)
    if family == "uniform-phase":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
        return np.exp(1j * theta) / np.sqrt(n)
    raise ValueError(family)


def sample_iid(spec, sample_index):
    """Draw the base i.i.d. matrix of ``spec`` for one sample index."""
    rng = derive_stream(spec.master_seed, sample_index, _STREAM_BASE)
    return _draw(spec.family, int(spec.dim), rng)


def gaussian_divisible(A, t, normalize=False, seed=0):
    """Return ``A + sqrt(t) B`` with ``B`` an independent Ginibre matrix.

    Parameters
    ----------
    A : (N, N) complex array
    t : float
        Nonnegative Gaussian time.
    normalize : bool
        Multiply the result by ``(1 + t)**-0.5``.
    seed : Generator, int or tuple
        Seed material for ``B``; a tuple is passed to :func:`derive_stream`.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if t == 0:
        out = A.astype(np.complex128, copy=True)
    else:
        B = ginibre(A.shape[0], _as_rng(seed))
        out = A + np.sqrt(t) * B
    if normalize:
        out = out / np.sqrt(1.0 + t)
    return out


def sample_pair(spec, sample_index):
    """Return ``(A, M)``: the base matrix and its Gaussian-divisible deformation.

    When ``spec.t == 0`` (and no normalization is requested) ``M`` is ``A``.
    """
    A = sample_iid(spec, sample_index)
    if spec.t == 0 and not spec.normalize_1plust:
        return A, A
    rng = derive_stream(spec.master_seed, sample_index, _STREAM_GAUSS)
    return A, gaussian_divisible(A, spec.t, spec.normalize_1plust, rng)


_MAGIC = b"CMAT"
_HEADER = struct.Struct("<4sIII")


def write_cmat(path, A):
    """Write a complex matrix: 16-byte header then column-major ``<c16`` data."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    rows, cols = A.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, rows, cols, 0))
        fh.write(A.ravel(order="F").astype("<c16").tobytes())


def read_cmat(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated CMAT header")
    magic, rows, cols, _ = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 16 * rows * cols:
        raise ValueError("CMAT payload size does not match header")
    data = np.frombuffer(body, dtype="<c16")
    return data.reshape((rows, cols), order="F").astype(np.complex128)
