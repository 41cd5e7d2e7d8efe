"""Autonomous algorithm-search harness.

Agents develop candidate algorithms round by round; a controller picks
each round's action (generate / tune / evolve / mutate) from ranked
history, a lineage-aware sampler picks parents, and an SQLite store keeps
every candidate, metric, and failure for recovery and reporting.
"""

__version__ = "0.1.0"
