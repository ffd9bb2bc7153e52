#pragma once

// Convenience include for the whole library.

#include "privmc/eigsolve.hpp"
#include "privmc/experiment.hpp"
#include "privmc/frank_wolfe.hpp"
#include "privmc/metrics.hpp"
#include "privmc/model_io.hpp"
#include "privmc/observed.hpp"
#include "privmc/oja.hpp"
#include "privmc/parallel.hpp"
#include "privmc/pgd.hpp"
#include "privmc/privacy.hpp"
#include "privmc/ratings.hpp"
#include "privmc/rng.hpp"
#include "privmc/sparse.hpp"
#include "privmc/svd_completion.hpp"
#include "privmc/synthetic.hpp"
