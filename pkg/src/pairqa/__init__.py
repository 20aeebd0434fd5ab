"""Compatibility-guided pairing of retrieved and LLM-generated passages.

The pipeline scores all generated x retrieved passage pairs of a question
with pluggable discriminator backends, matches them into pairs by solving
maximum-weight bipartite matching, and serializes the sorted pairs into
reader-ready input blocks. Silver-label mining, conflict analysis, and a
synthetic simulator round out the toolkit.
"""

__version__ = "0.1.0"
