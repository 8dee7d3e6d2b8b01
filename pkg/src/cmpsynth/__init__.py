"""Entity-comparison corpus synthesis pipeline.

Mines entity-comparison quintuples by aligning a structured knowledge base
with text corpora, textualizes them into QA pairs, summaries, and evidence
document pairs, and emits multi-task sequence-to-sequence pre-training
records plus evaluation tooling for comparative QA/QG/summarization.
"""

__version__ = "0.1.0"
