#pragma once

#include "tipslip/core.hpp"
#include "tipslip/dome.hpp"
#include "tipslip/mechanics.hpp"
#include "tipslip/sensing.hpp"
#include "tipslip/tracking.hpp"
#include "tipslip/changepoint.hpp"
#include "tipslip/detector.hpp"
#include "tipslip/harness.hpp"
