#pragma once

#include "seqicp/dataset.hpp"
#include "seqicp/environments.hpp"
#include "seqicp/error.hpp"
#include "seqicp/io.hpp"
#include "seqicp/random.hpp"
#include "seqicp/regression.hpp"
#include "seqicp/resampling.hpp"
#include "seqicp/search.hpp"
#include "seqicp/simulation.hpp"
#include "seqicp/statistics.hpp"
