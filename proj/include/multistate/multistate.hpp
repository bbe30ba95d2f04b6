#pragma once

#include "multistate/density.hpp"
#include "multistate/errors.hpp"
#include "multistate/exact.hpp"
#include "multistate/inactive.hpp"
#include "multistate/linalg.hpp"
#include "multistate/model.hpp"
#include "multistate/quadrature.hpp"
#include "multistate/rng.hpp"
#include "multistate/simulate.hpp"
#include "multistate/special.hpp"
#include "multistate/spectra.hpp"
