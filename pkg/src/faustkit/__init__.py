"""Multi-layer sparse approximation of matrices (FAuST)."""

from .sparse import (FaustOperator, FlopCounter, SparseMatrix, faust_apply,
                     faust_apply_transpose, faust_to_dense, relative_complexity,
                     relative_error)
from .linalg import ConvergenceWarning, NumericalError, spectral_norm, truncated_svd
from .projections import (ConstraintSet, Diagonal, Fixed, FixedSupport, GlobalSparsity,
                          PartitionSparsity, PerColumnSparsity, PerRowSparsity,
                          PiecewiseConstantSparse, RowColSparsity, Triangular, Unconstrained, project,
                          top_k_select)
from .palm import PalmConfig, PalmState, RunTrace, palm4msa
from .hierarchical import (FactorizationPlan, hierarchical_factorize, make_hadamard_plan,
                           make_schedule_plan)

__version__ = "0.1.0"
