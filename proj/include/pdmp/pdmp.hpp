#pragma once

#include "pdmp/analysis.hpp"
#include "pdmp/config.hpp"
#include "pdmp/coupling.hpp"
#include "pdmp/engine.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/event_time.hpp"
#include "pdmp/io.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/samplers.hpp"
#include "pdmp/state_space.hpp"
#include "pdmp/stats.hpp"
