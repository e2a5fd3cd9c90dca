"""Human-in-the-loop event detection over timestamped corpora.

Pipeline: ingest a corpus, embed documents with a time-aware representation,
lay them out on a topic-time heatmap, collect same-event/different-event pair
judgments over heatmap regions, convert judgments to triplets that fine-tune
the similarity metric, and regenerate the heatmap and event clustering from
the updated model.
"""

__version__ = "0.1.0"
