"""Trainable cost and fitness proxies behind two small contracts."""

from .base import COST_FLOOR, CostModel, FitnessModel
from .cost import (LinearCostModel, MeasuredCostModel, TreeCostModel, train_cost_tree,
                   train_linear_cost)
from .evaluate import FitnessAccuracy, evaluate_cost_accuracy, evaluate_fitness_accuracy, rmse
from .fitness import (ERROR_TOL, FitnessTable, LinearFitnessModel, M5FitnessModel,
                      MissingProfileWarning, grid_index, measured_fitness, train_fitness_m5, train_fitness_table, train_linear_fitness)
from .tree import EXACT, ModelTree, TreeParams, fit_linear, population_sd, sdr, train_model_tree

__all__ = [
    "COST_FLOOR", "CostModel", "FitnessModel",
    "LinearCostModel", "MeasuredCostModel", "TreeCostModel", "train_cost_tree", "train_linear_cost",
    "FitnessAccuracy", "evaluate_cost_accuracy", "evaluate_fitness_accuracy", "rmse",
    "ERROR_TOL", "FitnessTable", "LinearFitnessModel", "M5FitnessModel",
    "MissingProfileWarning", "grid_index", "measured_fitness",
    "train_fitness_m5", "train_fitness_table", "train_linear_fitness",
    "EXACT", "ModelTree", "TreeParams", "fit_linear", "population_sd", "sdr", "train_model_tree",
]
