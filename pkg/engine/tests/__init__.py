"""
Test package for the core-value importance engine

Covers:
- Corpus loading and filters
- Text preprocessing and n-grams
- Graph construction, centrality oracles
- Scoring, sentiment, reports
- Pipeline runs and the command line
"""
