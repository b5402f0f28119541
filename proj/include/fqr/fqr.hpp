#pragma once

#include "fqr/commands.hpp"
#include "fqr/config.hpp"
#include "fqr/dataset.hpp"
#include "fqr/diagnostics.hpp"
#include "fqr/dists.hpp"
#include "fqr/draws_io.hpp"
#include "fqr/error.hpp"
#include "fqr/gibbs.hpp"
#include "fqr/inference.hpp"
#include "fqr/rng.hpp"
#include "fqr/simgen.hpp"
#include "fqr/wavelet.hpp"
