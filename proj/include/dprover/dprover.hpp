#pragma once

#include "dprover/candidates.hpp"
#include "dprover/commands.hpp"
#include "dprover/dpp.hpp"
#include "dprover/embed.hpp"
#include "dprover/error.hpp"
#include "dprover/filter.hpp"
#include "dprover/metrics.hpp"
#include "dprover/proof_tree.hpp"
#include "dprover/search.hpp"
#include "dprover/synthetic.hpp"
#include "dprover/transitions.hpp"
