"""labelmine: label-vector search with metaheuristics and
classifier-validation fitness.

Kept import-light on purpose; pull what you need from the submodules
(codes, dataset, classifiers, fitness, ga, sa, oracle, grid, bench, cli).
"""

__version__ = "0.1.0"
