"""
Core-value importance engine

Measures how much attention each stakeholder group gives to a set of
core value orientations in short texts:
- Corpus loading, spam and query filtering, group partitioning
- Co-occurrence networks with concept-node merging
- Semantic Brand Score (prevalence, diversity, connectivity) and shares
- Lexicon sentiment per orientation, Table-style reports
"""

__version__ = "1.0.0"
__author__ = "SBS Engine Team"
__description__ = "Semantic Brand Score importance of core value orientations"
