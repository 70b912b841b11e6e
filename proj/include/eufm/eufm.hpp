#pragma once

// Umbrella header: closed-form minimizers, spectra, training, and collapse
// metrics for the linear-layer extended unconstrained feature model.

#include "eufm/analytic.hpp"
#include "eufm/harness.hpp"
#include "eufm/imbalance.hpp"
#include "eufm/kvfile.hpp"
#include "eufm/linalg.hpp"
#include "eufm/metrics.hpp"
#include "eufm/model.hpp"
#include "eufm/spectral.hpp"
#include "eufm/trainer.hpp"
