#pragma once

#include "hierlogit/calibration.hpp"
#include "hierlogit/compression.hpp"
#include "hierlogit/config.hpp"
#include "hierlogit/dataset.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/experiment.hpp"
#include "hierlogit/hierarchy.hpp"
#include "hierlogit/inference.hpp"
#include "hierlogit/lbfgs.hpp"
#include "hierlogit/logit_math.hpp"
#include "hierlogit/metrics.hpp"
#include "hierlogit/selection.hpp"
#include "hierlogit/synthetic.hpp"
