"""Exact finite-precision encodings over fibered sets.

Everything downstream of the dyadic codec is integer arithmetic on
mantissas, so experiment outputs are reproducible bit for bit from the
config and seed.
"""

__version__ = "0.1.0"

from .dyadic import (
    PREC_MAX,
    R_MAX,
    Bitstring,
    Box,
    DyadicScalar,
    DyadicVector,
    decode_fixed,
    decode_pair,
    encode_fixed,
    encode_pair,
    header_length,
    refine_consistency,
    truncate,
    truncate_scalar,
)
from .errors import (
    AmbiguousCandidates,
    ConfigInvalid,
    CoverageGap,
    EnumerationBudgetExceeded,
    FiberlabError,
    InsufficientData,
    MalformedHeader,
    MissingArtifacts,
    MissingLedger,
    NoMatch,
    OutOfBox,
    PrecisionOverflow,
    UnsupportedDimension,
)
from .ledger import BitStream, LedgerEntry, SourceLedger, uncovered_bits
from .fibering import (
    R_ENUM,
    BasepointSpec,
    FamilyMember,
    FiberFamily,
    FiberingModel,
    GarblingSpec,
    admissible_labels,
    apply_garbling,
    bilipschitz_ratios,
    containing_labels,
    crossing_point,
    eval_psi,
    garble_ledger,
    make_axis_chart,
    make_crossing_2d,
    make_identity,
    make_kakeya_linear,
    make_parallel_2d,
    make_stitched,
    psi_rows,
)
from .inversion import (
    BitBudget,
    ComposeResult,
    GridConstants,
    InversionResult,
    OverheadFit,
    compose,
    constants_for,
    decode_program,
    invert_enumerate,
    invert_fast,
    overhead_fit,
)
from .complexity import (
    CATALOG_BITS,
    CrossingSample,
    EstimatorHandle,
    SamplePoint,
    SplitReport,
    SplitRow,
    dim_slope,
    fit_line,
    k_cond_est,
    k_est,
    sample_crossing,
    sample_ladder,
    sample_point,
    split_check,
)
from .experiments import (
    ALLOWANCE_CONST,
    ALLOWANCE_SLOPE,
    AmbiguityReport,
    AmbiguityRow,
    AmbiguitySample,
    DpiReport,
    DpiRow,
    MinimaxReport,
    SchematicRow,
    SchematicTable,
    allowance,
    ambiguity_gain,
    chain_rule_floor,
    covering_entropy,
    covering_profile,
    crossing_ambiguity_sample,
    dense_image,
    dpi_check,
    family_ambiguity_sample,
    robust_minimax,
    schematic_curves,
)
