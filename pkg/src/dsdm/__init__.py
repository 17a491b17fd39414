# Dynamic spatial Durbin model estimation
from .data import DsdmSpec, DsdmData, demean_two_way, prepare_data, FIXED_EFFECTS, ESTIMATORS, BIAS_CORRECTIONS
from .likelihood import loglik, loglik_contributions, profile_loglik, concentrate, residuals
from .fit import DsdmFit, fit_mle, fit_qmle, stationarity_check, significance_stars
from .bias import correct_bias, expected_score
from .bayes import fit_bayes, split_rhat
from .coupling import coupling_correlation
