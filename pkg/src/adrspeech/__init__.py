"""adrspeech: acoustic pipeline for speech-based cognitive screening.

Raw WAV -> loudness normalization -> 1 s frames -> 88-dim acoustic features
-> SOM-based active data representation -> kernel Naive Bayes (diagnosis) or
SMO-trained RBF SVR (cognitive score), plus propensity-score cohort matching
and the task evaluation metrics.
"""

__version__ = "0.1.0"
