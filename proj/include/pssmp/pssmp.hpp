#pragma once

#include "pssmp/errors.hpp"
#include "pssmp/numeric.hpp"
#include "pssmp/levy_model.hpp"
#include "pssmp/model_io.hpp"
#include "pssmp/moments.hpp"
#include "pssmp/rng.hpp"
#include "pssmp/simulated_jumps.hpp"
#include "pssmp/lamperti_sim.hpp"
#include "pssmp/sde_sim.hpp"
#include "pssmp/verify.hpp"
#include "pssmp/report_io.hpp"
