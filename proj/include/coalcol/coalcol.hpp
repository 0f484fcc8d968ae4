#pragma once

#include "coalcol/bounds.hpp"
#include "coalcol/chain.hpp"
#include "coalcol/checks.hpp"
#include "coalcol/error.hpp"
#include "coalcol/experiment.hpp"
#include "coalcol/measure.hpp"
#include "coalcol/parallel.hpp"
#include "coalcol/random.hpp"
#include "coalcol/rates.hpp"
#include "coalcol/special.hpp"
#include "coalcol/stable.hpp"
#include "coalcol/stats.hpp"
#include "coalcol/version.hpp"
