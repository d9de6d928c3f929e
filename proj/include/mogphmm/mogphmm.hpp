#pragma once

#include "mogphmm/baseline.hpp"
#include "mogphmm/cascade.hpp"
#include "mogphmm/dataset.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/evolve.hpp"
#include "mogphmm/experiment.hpp"
#include "mogphmm/gp_tree.hpp"
#include "mogphmm/hmm.hpp"
#include "mogphmm/lifelog.hpp"
#include "mogphmm/pareto.hpp"
#include "mogphmm/parallel.hpp"
#include "mogphmm/random.hpp"
#include "mogphmm/serialization.hpp"
#include "mogphmm/synthesis.hpp"
#include "mogphmm/version.hpp"
