"""Eigenvector statistics of non-Hermitian random matrices.

Sampling, Hermitization and local-law checks, the deterministic equivalent
of the Hermitized resolvent, the Schur-type change of variables and the
statistical tests used to compare eigenvector overlaps with their limit laws.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .ensemble import EnsembleSpec, sample_iid, sample_pair  # noqa: E402
from .spectral import EigenTriple, ProjectionObservable, SpectralSet, eig_near, eig_pairs  # noqa: E402
from .stats import GaussianSquareLaw, LimitLaw  # noqa: E402
