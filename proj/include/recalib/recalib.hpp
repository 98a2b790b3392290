#pragma once

// Effect-size calibration between trial populations by likelihood
// reweighting, with noninferiority inference on top.

#include "recalib/bootstrap.hpp"
#include "recalib/calibration.hpp"
#include "recalib/data.hpp"
#include "recalib/error.hpp"
#include "recalib/glm.hpp"
#include "recalib/io.hpp"
#include "recalib/ni_test.hpp"
#include "recalib/propensity.hpp"
#include "recalib/report.hpp"
#include "recalib/rng.hpp"
#include "recalib/sim.hpp"
#include "recalib/stats.hpp"
#include "recalib/version.hpp"
#include "recalib/weights.hpp"
