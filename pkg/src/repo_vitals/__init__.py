"""Repository maintenance analytics.

Classifies repositories as active or unmaintained from windowed activity
features, scores active ones on a 0-100 maintenance-activity scale, and runs
survival and practice-adoption analyses over corpora.
"""

__version__ = "0.1.0"
