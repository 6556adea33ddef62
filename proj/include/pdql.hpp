#pragma once

// Umbrella header for the PDQL laboratory.

#include "pdql/bounds.hpp"
#include "pdql/config.hpp"
#include "pdql/coverage.hpp"
#include "pdql/delayed_q.hpp"
#include "pdql/errors.hpp"
#include "pdql/experiment.hpp"
#include "pdql/lattice.hpp"
#include "pdql/mdp.hpp"
#include "pdql/mdp_json.hpp"
#include "pdql/oracle.hpp"
#include "pdql/phased_q.hpp"
#include "pdql/plots.hpp"
#include "pdql/qlearning.hpp"
#include "pdql/random.hpp"
#include "pdql/submdp.hpp"
#include "pdql/trace.hpp"
#include "pdql/validation.hpp"
#include "pdql/vrql.hpp"
