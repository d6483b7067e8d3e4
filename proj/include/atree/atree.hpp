#pragma once

#include "atree/accounting.hpp"
#include "atree/common.hpp"
#include "atree/cost_model.hpp"
#include "atree/index.hpp"
#include "atree/index_io.hpp"
#include "atree/optimal_segmentation.hpp"
#include "atree/segmentation.hpp"

#include "atree/bench/baselines.hpp"
#include "atree/bench/dataset_io.hpp"
#include "atree/bench/datasets.hpp"
#include "atree/bench/drivers.hpp"
#include "atree/bench/harness.hpp"
