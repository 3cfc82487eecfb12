#pragma once

#include "rareloom/canonical.hpp"
#include "rareloom/errors.hpp"
#include "rareloom/goodturing.hpp"
#include "rareloom/harness.hpp"
#include "rareloom/measures.hpp"
#include "rareloom/mixing.hpp"
#include "rareloom/rng.hpp"
#include "rareloom/sources.hpp"
