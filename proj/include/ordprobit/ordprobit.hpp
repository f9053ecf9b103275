// Pairwise likelihood estimation for the multivariate ordered probit model.
#pragma once

#include "ordprobit/gauss.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/counts.hpp"
#include "ordprobit/pairwise.hpp"
#include "ordprobit/fit.hpp"
#include "ordprobit/godambe.hpp"
#include "ordprobit/simulate.hpp"
