#pragma once

#include "tempo/ads.hpp"
#include "tempo/cstr.hpp"
#include "tempo/discretize.hpp"
#include "tempo/experiments.hpp"
#include "tempo/json_io.hpp"
#include "tempo/lq.hpp"
#include "tempo/lq_solver.hpp"
#include "tempo/lq_theory.hpp"
#include "tempo/nlp_solver.hpp"
#include "tempo/ocp.hpp"
#include "tempo/parallel.hpp"
#include "tempo/riccati.hpp"
#include "tempo/schwarz.hpp"
#include "tempo/solver_options.hpp"
#include "tempo/subsolvers.hpp"
#include "tempo/types.hpp"
