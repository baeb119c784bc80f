"""Python access to the corpus conversion core.

Documents travel as canonical ``.ccs.json`` text, labels as ``.labels.json``
text and models as the binary model file bytes.
"""

import json

from ._ccs import (
    Error,
    benchmark,
    compare_published,
    convert,
    cross_validate,
    generate_synthetic_corpus,
    parse_pdf,
    predict,
    published_table,
    reading_order,
    recall_precision,
    train,
    validate_document,
)

__all__ = [
    "Error",
    "benchmark",
    "compare_published",
    "convert",
    "cross_validate",
    "generate_synthetic_corpus",
    "load_document",
    "parse_pdf",
    "predict",
    "published_table",
    "reading_order",
    "recall_precision",
    "train",
    "validate_document",
]


def load_document(text):
    """Decode ``.ccs.json`` text into plain dicts."""
    return json.loads(text)
