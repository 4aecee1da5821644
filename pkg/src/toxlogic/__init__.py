"""Probabilistic logic toxidrome classification and benchmark harness."""

from .rulelang import (
    Atom,
    Clause,
    Constant,
    ParseError,
    Program,
    SemanticError,
    Variable,
    parse_file,
    parse_program,
    parse_text,
    print_program,
    tokenize,
)
from .worlds import (
    ChoiceGroup,
    EnumerationCapError,
    GroundingError,
    GroundProgram,
    GroundRule,
    InconsistentEvidenceError,
    Posterior,
    World,
    explain,
    ground,
    holds,
    posterior,
    query_probability,
)
from .toxkb import (
    SIGNS,
    TEMPLATES,
    TOXIDROMES,
    VALUE_DOMAINS,
    KnowledgeBase,
    KnowledgeBaseError,
    ToxidromeTemplate,
    load_kb,
    template_of,
)
from .casegen import (
    Case,
    Dataset,
    SplitMix64,
    generate_case,
    generate_dataset,
    plausibility_filter,
)
from .evalkappa import ConfusionMatrix, KappaReport, kappa, run_benchmark

__version__ = "0.1.0"
