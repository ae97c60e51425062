#ifndef INFOUT_INFOUT_HPP
#define INFOUT_INFOUT_HPP

#include "infout/errors.hpp"
#include "infout/numerics.hpp"
#include "infout/csv.hpp"
#include "infout/gmm.hpp"
#include "infout/linear_classifier.hpp"
#include "infout/channel_latency.hpp"
#include "infout/outage_analysis.hpp"
#include "infout/c2_optimizer.hpp"
#include "infout/cnn_dg_pipeline.hpp"
#include "infout/experiment.hpp"

#endif
