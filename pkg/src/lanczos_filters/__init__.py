"""CGNE and hybrid CG-Tikhonov regularization with Lanczos-basis filter factors."""

from .bidiag import GKBState, TridiagExt, bidiagonalize, gkb_init, gkb_step, to_tridiag
from .filters import (
    LanczosFilterSet,
    cg_polynomial_filter,
    cgt_filter_at_ritz,
    lanczos_filters_ratio,
    lanczos_filters_recurrence,
    natural_residual_via_filters,
    svd_filters,
    truncation_filters,
)
from .problems import DiscreteProblem, add_noise, build_gravity, build_shaw, compute_svd
from .solvers import (
    IterateRecord,
    cgne_iterate,
    cgne_via_recurrence,
    cgt_iterate,
    cgt_via_recurrence,
    discrepancy_stop,
)
from .tridiag import det_shift, inverse_entry, shift_increments

__version__ = "0.1.0"
