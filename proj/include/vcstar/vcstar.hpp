#pragma once

// Umbrella header for the full library.

#include "vcstar/common.hpp"
#include "vcstar/rng.hpp"
#include "vcstar/tensor.hpp"
#include "vcstar/autodiff.hpp"
#include "vcstar/nn_ops.hpp"
#include "vcstar/features.hpp"
#include "vcstar/feature_io.hpp"
#include "vcstar/synthetic.hpp"
#include "vcstar/models.hpp"
#include "vcstar/objectives.hpp"
#include "vcstar/metrics.hpp"
#include "vcstar/training.hpp"
