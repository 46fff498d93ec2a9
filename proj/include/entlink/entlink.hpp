#pragma once

#include "entlink/budget.hpp"
#include "entlink/coincide.hpp"
#include "entlink/franson.hpp"
#include "entlink/grid.hpp"
#include "entlink/montecarlo.hpp"
#include "entlink/pipeline.hpp"
#include "entlink/rng.hpp"
#include "entlink/scenario.hpp"
#include "entlink/tagio.hpp"
#include "entlink/version.hpp"
