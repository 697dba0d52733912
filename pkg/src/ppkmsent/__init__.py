"""Sentiment-analysis pipeline for Indonesian PPKM tweets.

Stages: corpus ingestion and triage, regex preprocessing, lexicon bootstrap
labeling, classifier training (Multinomial Naive Bayes, linear SVM, and a
small trainable transformer encoder), confusion-matrix evaluation, and
frequency visualizations.  The ``ppkmsent`` CLI drives the stages end to end
from a single config file.
"""

__version__ = "0.1.0"

from ppkmsent.preprocess import Document, SentimentLabel

__all__ = ["Document", "SentimentLabel", "__version__"]
