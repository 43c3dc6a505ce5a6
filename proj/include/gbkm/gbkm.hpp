#pragma once

#include "gbkm/core.hpp"
#include "gbkm/selection.hpp"
#include "gbkm/solver.hpp"
#include "gbkm/problems.hpp"
#include "gbkm/analysis.hpp"
#include "gbkm/harness.hpp"
