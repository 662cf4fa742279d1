"""Sales-call summarization toolkit.

Segments call transcripts, generates per-segment abstractive highlights
with a speaker/turn-aware encoder-decoder, gates them through a
perplexity-based acceptability check, scores output with the SumSim
composite metric, and supports human-in-the-loop curation plus offline
pseudo-label generation.
"""

__version__ = "0.1.0"
