#pragma once

#include "actinf/batch.hpp"
#include "actinf/composite.hpp"
#include "actinf/config.hpp"
#include "actinf/core.hpp"
#include "actinf/csv.hpp"
#include "actinf/error.hpp"
#include "actinf/harness.hpp"
#include "actinf/losses.hpp"
#include "actinf/nonasymptotic.hpp"
#include "actinf/normal.hpp"
#include "actinf/predictors.hpp"
#include "actinf/rng.hpp"
#include "actinf/sampling.hpp"
#include "actinf/sequential.hpp"
#include "actinf/synthetic.hpp"
