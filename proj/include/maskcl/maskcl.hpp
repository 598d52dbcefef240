#pragma once

#include "maskcl/agents.hpp"
#include "maskcl/bench.hpp"
#include "maskcl/dataset.hpp"
#include "maskcl/engine.hpp"
#include "maskcl/error.hpp"
#include "maskcl/fitness.hpp"
#include "maskcl/genome.hpp"
#include "maskcl/llm_client.hpp"
#include "maskcl/random.hpp"
#include "maskcl/run_io.hpp"
