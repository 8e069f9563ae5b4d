#pragma once

#include "qsd/analysis.hpp"
#include "qsd/dispersion.hpp"
#include "qsd/errors.hpp"
#include "qsd/model.hpp"
#include "qsd/ode.hpp"
#include "qsd/pde.hpp"
#include "qsd/specfun.hpp"
