#pragma once

#include "boundary_bayes.hpp"
#include "calibration.hpp"
#include "hpd.hpp"
#include "io.hpp"
#include "model.hpp"
#include "order_mle.hpp"
#include "parallel.hpp"
#include "resampling.hpp"
#include "rng.hpp"
#include "robust.hpp"
#include "stats.hpp"
#include "studies.hpp"
#include "svg.hpp"
