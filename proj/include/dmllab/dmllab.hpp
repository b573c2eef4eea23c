#ifndef DMLLAB_DMLLAB_HPP
#define DMLLAB_DMLLAB_HPP

#include "dmllab/dataset.hpp"
#include "dmllab/dgp.hpp"
#include "dmllab/dml.hpp"
#include "dmllab/folds.hpp"
#include "dmllab/learners/fit.hpp"
#include "dmllab/metrics.hpp"
#include "dmllab/rng.hpp"
#include "dmllab/runner.hpp"
#include "dmllab/selection.hpp"
#include "dmllab/tuning.hpp"

#endif
