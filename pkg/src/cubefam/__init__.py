"""Set families in the subset lattice: mass, pivots, embeddings, extraction.

The package is organized bottom-up:

- families: bitmask subsets, immutable families, Lubell mass, file format
- posets: finite posets, weak/induced subposet search, poset file format
- embeddings: down-set maps, randomized cube location in dense families
- concentration: sampling tail checks and the (eta, c, m0) recursion
- pivots: swap-out/swap-in structure, flexibility, fatness
- extraction: the constant cascade and the step-by-step copy extractor
- extremal: exact branch-and-bound for pattern-avoiding optima
- cli: batch subcommands with reproducible reports
"""

from .errors import (
    CertificationError,
    CubefamError,
    ParseError,
    PreconditionError,
    SearchBudgetExceeded,
)
from .families import (
    GroundSet,
    SetFamily,
    complement_family,
    full_power_set,
    lubell_mass,
    parse_family,
    read_family,
    relative_lubell,
    split_half,
    write_family,
)
from .posets import (
    EmbeddingMap,
    FinitePoset,
    contains_subposet,
    enumerate_posets,
    family_as_poset,
    make_chain,
    make_cube,
    make_v,
    parse_poset,
    read_poset,
)
from .embeddings import (
    DenseTruncatedFamily,
    downset_embedding,
    find_pattern_via_universality,
    randomized_cube_embed,
    universality_epsilon,
)
from .concentration import (
    concentration_constants,
    fat_mass_bound,
    verify_tail_bound,
    verify_trace_probability,
)
from .pivots import (
    FatnessQuery,
    MassBoundReport,
    PivotRecord,
    PivotSet,
    enumerate_anti_pivots,
    enumerate_pivots,
    flexibility_mass_bound,
    hillclimb_flexfree_mass,
    is_fat,
    is_flexible,
    max_flexfree_mass,
    observation_check,
    validate_record,
    verify_fat_mass_bound,
    verify_flexibility_bound,
)
from .extraction import (
    centred_element,
    compute_cascade,
    extract_induced_copy,
    override_cascade,
)
from .extremal import extremal_search, middle_layers_number

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "CubefamError",
    "DenseTruncatedFamily",
    "EmbeddingMap",
    "FatnessQuery",
    "FinitePoset",
    "GroundSet",
    "MassBoundReport",
    "ParseError",
    "PivotRecord",
    "PivotSet",
    "PreconditionError",
    "SearchBudgetExceeded",
    "SetFamily",
    "centred_element",
    "complement_family",
    "compute_cascade",
    "concentration_constants",
    "contains_subposet",
    "downset_embedding",
    "enumerate_anti_pivots",
    "enumerate_pivots",
    "enumerate_posets",
    "extract_induced_copy",
    "extremal_search",
    "family_as_poset",
    "fat_mass_bound",
    "find_pattern_via_universality",
    "flexibility_mass_bound",
    "full_power_set",
    "hillclimb_flexfree_mass",
    "is_fat",
    "is_flexible",
    "lubell_mass",
    "max_flexfree_mass",
    "make_chain",
    "make_cube",
    "make_v",
    "middle_layers_number",
    "observation_check",
    "override_cascade",
    "parse_family",
    "parse_poset",
    "randomized_cube_embed",
    "read_family",
    "read_poset",
    "relative_lubell",
    "split_half",
    "universality_epsilon",
    "validate_record",
    "verify_fat_mass_bound",
    "verify_flexibility_bound",
    "verify_tail_bound",
    "verify_trace_probability",
    "write_family",
    "__version__",
]
