#pragma once

#include "rvlbm/config.hpp"
#include "rvlbm/differential_operator.hpp"
#include "rvlbm/dispersion_oracle.hpp"
#include "rvlbm/equivalent_equation.hpp"
#include "rvlbm/errors.hpp"
#include "rvlbm/experiments.hpp"
#include "rvlbm/format.hpp"
#include "rvlbm/scheme_core.hpp"
#include "rvlbm/spectral.hpp"
#include "rvlbm/velocity_lattice.hpp"
