#pragma once

#include "paralab/rng.hpp"
#include "paralab/lattice.hpp"
#include "paralab/ncmat.hpp"
#include "paralab/stepfn.hpp"
#include "paralab/paraproducts.hpp"
#include "paralab/operator_spec.hpp"
#include "paralab/norms.hpp"
#include "paralab/opnorm.hpp"
#include "paralab/experiments.hpp"
