"""Distribution element tree density estimation."""

from .elements import (
    Cuboid,
    DistributionElement,
    MarginalKind,
    MarginalModel,
    Order,
    SplitMode,
    element_density,
    marginal_density,
    mmse_slope,
    split_cuboid,
)
from .ensemble import (
    DomainBounds,
    SampleEnsemble,
    WhitenTransform,
    apply_unwhiten,
    apply_whiten,
    compute_bounds,
    conditional_moments,
    fit_whiten,
    partition_by_threshold,
    read_csv,
)
from .errors import (
    DataFormatError,
    DegenerateDimension,
    DetError,
    DivisionByZeroDensity,
    DomainError,
    EmptySubset,
    FormatError,
    SingularCovariance,
    UnknownCase,
    UnsplittableInterval,
)
from .stat_tests import (
    GofStatistic,
    IndepStatistic,
    SignificanceConfig,
    TestOutcome,
    chi2_gof,
    chi2_independence,
    kendall_tau_independence,
    ks_gof,
    mann_wald_class_count,
)
from .special import chi2_sf, erfcinv
from .tree import (
    BuildConfig,
    DetTree,
    Final,
    SplitOne,
    SplitTwo,
    build,
    decide_node,
    draw_samples,
    integrate,
    query_density,
)
from .treeio import deserialize, load, save, serialize

__version__ = "0.1.0"
