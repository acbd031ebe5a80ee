#pragma once

// Convenience umbrella: pulls in the whole library.

#include "tss/error.hpp"
#include "tss/invariance.hpp"
#include "tss/kernels.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"
#include "tss/persist.hpp"
#include "tss/scalespace.hpp"
#include "tss/semgraph.hpp"
#include "tss/signal.hpp"
#include "tss/tasks.hpp"
#include "tss/textio.hpp"
