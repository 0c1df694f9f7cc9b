"""Design generation, curation filters, corruption and multi-block composition."""

from .client import (
    CommandClient,
    Design,
    GeneratorClient,
    HttpClient,
    RepairExhausted,
    RepairResult,
    StubClient,
    make_client,
    random_netlist,
    repair_loop,
    stub_scores,
)
from .compose import (
    ComposedDesign,
    compose_design,
    compose_flat_design,
    find_top,
    merge_netlists,
)
from .corrupt import FAMILIES, corrupt
from .curate import CurationConfig, CurationResult, curate, parse_curation_config
from .filters import (
    CurationRecord,
    FilterResult,
    StageOutcome,
    cell_count_filter,
    embed,
    similarity,
    similarity_filter,
)
from .generators import (
    ARCHITECTURES,
    DesignSpec,
    reference_function,
    synth_generate,
    top_name,
)
from .vote import architecture_vote

__all__ = [
    "ARCHITECTURES",
    "FAMILIES",
    "CommandClient",
    "ComposedDesign",
    "CurationConfig",
    "CurationRecord",
    "CurationResult",
    "Design",
    "DesignSpec",
    "FilterResult",
    "GeneratorClient",
    "HttpClient",
    "RepairExhausted",
    "RepairResult",
    "StageOutcome",
    "StubClient",
    "architecture_vote",
    "cell_count_filter",
    "compose_design",
    "compose_flat_design",
    "corrupt",
    "curate",
    "embed",
    "find_top",
    "make_client",
    "merge_netlists",
    "parse_curation_config",
    "random_netlist",
    "reference_function",
    "repair_loop",
    "similarity",
    "similarity_filter",
    "stub_scores",
    "synth_generate",
    "top_name",
]
