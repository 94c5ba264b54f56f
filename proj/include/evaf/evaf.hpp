#pragma once

#include "evaf/error.hpp"
#include "evaf/event.hpp"
#include "evaf/eval.hpp"
#include "evaf/frame.hpp"
#include "evaf/image.hpp"
#include "evaf/io.hpp"
#include "evaf/measure.hpp"
#include "evaf/parallel.hpp"
#include "evaf/prefix_index.hpp"
#include "evaf/search.hpp"
#include "evaf/sim.hpp"
