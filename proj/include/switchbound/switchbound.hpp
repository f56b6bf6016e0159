#pragma once

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/state_dependent.hpp"
#include "switchbound/semigroup.hpp"
#include "switchbound/coupling.hpp"
#include "switchbound/layout.hpp"
#include "switchbound/clocks.hpp"
#include "switchbound/sim.hpp"
#include "switchbound/parallel.hpp"
#include "switchbound/estimators.hpp"
#include "switchbound/bounds.hpp"
