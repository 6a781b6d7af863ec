#pragma once

// Krylov solvers for tomographic reconstruction with unmatched
// forward/back projector pairs, plus the projector discretizations,
// stopping rules, and spectral analyses around them.

#include "ctkrylov/analysis.hpp"
#include "ctkrylov/config.hpp"
#include "ctkrylov/csv.hpp"
#include "ctkrylov/dense.hpp"
#include "ctkrylov/errors.hpp"
#include "ctkrylov/geometry.hpp"
#include "ctkrylov/parallel.hpp"
#include "ctkrylov/phantom.hpp"
#include "ctkrylov/projector.hpp"
#include "ctkrylov/rng.hpp"
#include "ctkrylov/solvers.hpp"
#include "ctkrylov/sparse.hpp"
#include "ctkrylov/stopping.hpp"
