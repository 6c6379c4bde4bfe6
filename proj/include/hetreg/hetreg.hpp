#pragma once

#include "hetreg/engine.hpp"
#include "hetreg/errors.hpp"
#include "hetreg/huber.hpp"
#include "hetreg/io.hpp"
#include "hetreg/metrics.hpp"
#include "hetreg/selection.hpp"
#include "hetreg/simulate.hpp"
#include "hetreg/soglasso.hpp"
#include "hetreg/tuning.hpp"
#include "hetreg/types.hpp"
#include "hetreg/version.hpp"
