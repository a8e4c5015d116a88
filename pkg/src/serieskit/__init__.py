"""serieskit: exact k-NN similarity search for data series and dense vectors.

iSAX summarization, lower-bound pruning and five interchangeable exact
engines (bruteforce, lb-bruteforce, serial indexed, parallel in-memory,
disk-resident) behind one build/search API.
"""

from .api import EngineChoice, EnvironmentProfile, SearchSession, select_engine
from .backend import BACKEND
from .data import DatasetHandle, from_array, get_series, load_dataset, z_normalize
from .distance import (
    ABANDONED,
    DTW,
    L2_SQUARED,
    Envelope,
    build_envelope,
    default_dtw_radius,
    dtw,
    l2_squared,
    lb_dtw,
)
from .engines import (
    Answer,
    Counters,
    Summaries,
    bruteforce_search,
    build_summaries,
    disk_search,
    lb_bruteforce_search,
    parallel_search,
    serial_indexed_search,
)
from .index import (
    RAW_IN_MEMORY,
    RAW_ON_DISK,
    Index,
    IndexConfig,
    build_index,
    deserialize,
    serialize,
)
from .summarize import (
    ISaxWord,
    breakpoints,
    isax_word,
    mindist_dtw,
    mindist_paa_isax,
    paa,
)

__version__ = "0.1.0"

__all__ = [
    "ABANDONED",
    "Answer",
    "BACKEND",
    "Counters",
    "DTW",
    "DatasetHandle",
    "EngineChoice",
    "Envelope",
    "EnvironmentProfile",
    "ISaxWord",
    "Index",
    "IndexConfig",
    "L2_SQUARED",
    "RAW_IN_MEMORY",
    "RAW_ON_DISK",
    "SearchSession",
    "Summaries",
    "breakpoints",
    "bruteforce_search",
    "build_envelope",
    "build_index",
    "build_summaries",
    "default_dtw_radius",
    "deserialize",
    "disk_search",
    "dtw",
    "from_array",
    "get_series",
    "isax_word",
    "l2_squared",
    "lb_bruteforce_search",
    "lb_dtw",
    "load_dataset",
    "mindist_dtw",
    "mindist_paa_isax",
    "paa",
    "parallel_search",
    "select_engine",
    "serial_indexed_search",
    "serialize",
    "z_normalize",
]
