#pragma once

#include "otm/benchmarks.hpp"
#include "otm/bk.hpp"
#include "otm/compression.hpp"
#include "otm/evidence.hpp"
#include "otm/experiment.hpp"
#include "otm/pivotal.hpp"
#include "otm/random.hpp"
#include "otm/special.hpp"
