"""Toy-scale multi-task sequence-to-sequence trainer for comparison
pre-training shards.

Consumes the shard format of the corpus-synthesis pipeline verbatim, trains
a small encoder-decoder on the four tasks jointly (the summed per-task
negative log-likelihoods), and decodes predictions consumable by the
pipeline's eval CLI.
"""

__version__ = "0.1.0"
