#pragma once

#include "nsf/errors.hpp"
#include "nsf/thermo.hpp"
#include "nsf/counter_rng.hpp"
#include "nsf/noise.hpp"
#include "nsf/grid.hpp"
#include "nsf/galerkin.hpp"
#include "nsf/fields_pde.hpp"
#include "nsf/stepper.hpp"
#include "nsf/diagnostics.hpp"
#include "nsf/ensemble.hpp"
