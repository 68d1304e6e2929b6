"""Model selection for partition-based contextual bandit models of learning."""

__version__ = "0.1.0"
