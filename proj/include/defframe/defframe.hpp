#pragma once

// Umbrella header for the definition-frames toolkit.

#include "defframe/basis_store.hpp"
#include "defframe/core.hpp"
#include "defframe/corpus.hpp"
#include "defframe/frames.hpp"
#include "defframe/sim_eval.hpp"
#include "defframe/tagger.hpp"
#include "defframe/transform.hpp"
