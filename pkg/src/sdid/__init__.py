# Synthetic difference-in-differences
from .solver import project_simplex, solve_simplex_ridge, solve_simplex_ridge_full, SimplexSolution
from .estimator import (SdidProblem, SdidResult, fit_sdid, bootstrap_se, did_estimate, problem_from_panel,
                        size_split_table, default_zetas)
from .event_study import EventStudyResult, event_study
from .placebo import PlaceboDistribution, placebo_shift, placebo_random
