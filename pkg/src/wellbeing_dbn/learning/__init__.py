from .estimation import estimate_cpds
from .selection import evaluate_accuracy, select_structure
from .stats import pearson_r, welch_t_test

__all__ = ["estimate_cpds", "evaluate_accuracy", "pearson_r", "select_structure", "welch_t_test"]
