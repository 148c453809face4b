"""Online clustering of linear bandits: SCLUB, CLUB and LinUCB baselines."""

__version__ = "0.1.0"
