# Transport package
from .oracle import exact_oracle
from .semidiscrete import SemidiscreteSolution, default_grid_m, dump_solution, map_apply, solve
