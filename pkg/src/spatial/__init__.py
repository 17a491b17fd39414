# Spatial weight matrices
from .weights import (WeightMatrix, network_weights, geographic_weights, group_weights, similarity_weights,
                      row_normalize, spectrum, log_det, rho_bounds, haversine_matrix, load_weights,
                      write_weights, EARTH_RADIUS_KM)
