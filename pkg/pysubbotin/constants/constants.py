import json
from pathlib import Path

with open(Path(__file__).parent.__str__() + "/defaults.json") as f:
    defaults = json.load(f)

GIBBS_BURN_IN = defaults["gibbs"]["burn_in"]
GIBBS_THINNING = defaults["gibbs"]["thinning"]

LASSO_TOL = defaults["lasso"]["tol"]
LASSO_MAX_ITER = defaults["lasso"]["max_iter"]
LASSO_SHRINK = defaults["lasso"]["shrink"]
LASSO_INITIAL_STEP = defaults["lasso"]["initial_step"]

N_LAMBDAS = defaults["path"]["n_lambdas"]
LAMBDA_MIN_RATIO = defaults["path"]["lambda_min_ratio"]

ZERO_TOL = defaults["estimator"]["zero_tol"]
BISECTION_DEPTH = defaults["estimator"]["bisection_depth"]
DEFAULT_RULE = defaults["estimator"]["rule"]

# smallest eigenvalue must exceed this times the largest diagonal entry
PD_RELATIVE_THRESHOLD = defaults["normalizability"]["relative_eigen_threshold"]

STABILITY_REPLICATES = defaults["stability"]["replicates"]
STABILITY_THRESHOLD_SUBBOTIN = defaults["stability"]["threshold_subbotin"]
STABILITY_THRESHOLD_EXTREMES = defaults["stability"]["threshold_extremes"]

REWIRE_PROB = defaults["simgen"]["rewire_prob"]
WEAK_CORRELATION = defaults["simgen"]["weak_correlation"]
GEV_MEAN = defaults["simgen"]["gev_mean"]
POT_THRESHOLD = defaults["simgen"]["pot_threshold"]
THETA_MAGNITUDE = defaults["simgen"]["theta_magnitude"]
PD_MARGIN = defaults["simgen"]["pd_margin"]
MIN_OFFDIAGONAL = defaults["simgen"]["min_offdiagonal"]

HAWKES_DECAY = defaults["hawkes"]["decay"]
HAWKES_SPECTRAL_RADIUS = defaults["hawkes"]["spectral_radius"]
HAWKES_TARGET_RATE = defaults["hawkes"]["target_rate"]

QUANTILE_WIDTH = defaults["baselines"]["quantile_width"]
CDF_CLIP = defaults["baselines"]["cdf_clip"]
GEV_MAX_EVALUATIONS = defaults["baselines"]["gev_max_evaluations"]
GEV_MIN_SAMPLES = defaults["baselines"]["gev_min_samples"]
GUMBEL_SHAPE_TOL = defaults["baselines"]["gumbel_shape_tol"]
