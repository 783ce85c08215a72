#pragma once

#include "bvc/backward_verifier.hpp"
#include "bvc/chain_machinery.hpp"
#include "bvc/config.hpp"
#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"
#include "bvc/expansion_profile.hpp"
#include "bvc/experiment.hpp"
#include "bvc/rate_derivation.hpp"
#include "bvc/rate_sequences.hpp"
#include "bvc/rng.hpp"
#include "bvc/series.hpp"
