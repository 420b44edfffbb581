"""chronoforge: build point-in-time text corpora and audit temporal leakage.

Subpackages cover the full pipeline: streaming Wikipedia history ingestion,
yearly news ingestion, SHA-256 deduplication, recency-weighted sampling under
a token budget, corpus assembly with sequence packing, and a zero-context
perplexity evaluation suite.
"""

__version__ = "0.1.0"
