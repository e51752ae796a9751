"""Evidence-weighted knowledge graph with graph-based retrieval."""
