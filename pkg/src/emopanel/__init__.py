"""Investor-emotion measurement and inference pipeline.

Library + CLI covering message normalization, dictionary weak labeling,
a bidirectional-GRU emotion classifier, Shapley word attribution,
follower-weighted firm-event aggregation, four-factor event studies,
fixed-effects panel regressions, and a closed-form emotion pricing model.
"""

__version__ = "0.1.0"

EMOTION_CLASSES = ("neutral", "happy", "sad", "anger", "disgust", "surprise", "fear")
