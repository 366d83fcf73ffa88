#pragma once

#include "taxometer/adequacy.hpp"
#include "taxometer/error.hpp"
#include "taxometer/gateway.hpp"
#include "taxometer/harness.hpp"
#include "taxometer/io.hpp"
#include "taxometer/kendall.hpp"
#include "taxometer/mutation.hpp"
#include "taxometer/reference_metrics.hpp"
#include "taxometer/robustness.hpp"
#include "taxometer/taxonomy.hpp"
