#pragma once

#include "baselines.hpp"
#include "errors.hpp"
#include "evolution.hpp"
#include "feature_set.hpp"
#include "lmops.hpp"
#include "models.hpp"
#include "oracle.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "tabular.hpp"
