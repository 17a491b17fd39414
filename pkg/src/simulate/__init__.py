# Synthetic panels with known ground truth
from .dgp import DgpSpec, derive_seed, ring_weights, TREATMENT_RULES, SDID_VARIANTS, ERROR_DISTRIBUTIONS
from .dsdm_dgp import DsdmInnovations, dsdm_innovations, gen_dsdm, truth_table
from .sdid_dgp import gen_sdid, generate_batch
