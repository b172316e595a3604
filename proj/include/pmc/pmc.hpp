#pragma once

// Umbrella header for the periodic Markov chain large-deviation toolkit.

#include "pmc/config.hpp"
#include "pmc/contract.hpp"
#include "pmc/csv.hpp"
#include "pmc/entropy.hpp"
#include "pmc/graph.hpp"
#include "pmc/grid.hpp"
#include "pmc/ldp.hpp"
#include "pmc/linalg.hpp"
#include "pmc/protocol.hpp"
#include "pmc/rng.hpp"
#include "pmc/sampling.hpp"
#include "pmc/simulate.hpp"
#include "pmc/steady.hpp"
