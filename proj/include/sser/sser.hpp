#pragma once

#include "sser/epochs.hpp"
#include "sser/errors.hpp"
#include "sser/io.hpp"
#include "sser/lse.hpp"
#include "sser/metrics.hpp"
#include "sser/model.hpp"
#include "sser/ploa.hpp"
#include "sser/simgen.hpp"
#include "sser/solver.hpp"
