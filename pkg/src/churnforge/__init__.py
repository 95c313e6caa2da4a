"""churnforge: transaction-stream churn prediction at desk scale."""

__version__ = "0.1.0"
