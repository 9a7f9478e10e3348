"""Self-service spoken-language-understanding toolkit.

Compiles developer-authored interaction models into a hybrid NLU stack:
a deterministic weighted-FST recognizer plus statistical intent/slot
models, built through a DAG pipeline and served from a local model store.
"""

from ._core import (  # noqa: F401
    BloomFilter,
    Engine,
    Grammar,
    ModelStore,
    build_bundle,
    tokenize,
    validate_model_dir,
)

__all__ = [
    "BloomFilter",
    "Engine",
    "Grammar",
    "ModelStore",
    "build_bundle",
    "tokenize",
    "validate_model_dir",
]
