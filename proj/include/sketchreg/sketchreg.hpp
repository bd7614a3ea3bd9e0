#pragma once

#include "covariance.hpp"
#include "csv.hpp"
#include "estimator.hpp"
#include "experiment.hpp"
#include "measures.hpp"
#include "model.hpp"
#include "sketch.hpp"
#include "theory.hpp"
#include "tuning.hpp"
