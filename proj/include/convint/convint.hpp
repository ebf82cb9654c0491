#pragma once

#include "convint/types.hpp"
#include "convint/lp.hpp"
#include "convint/geometry.hpp"
#include "convint/profile.hpp"
#include "convint/constraint.hpp"
#include "convint/waves.hpp"
#include "convint/parallel.hpp"
#include "convint/quadrature.hpp"
#include "convint/field.hpp"
#include "convint/perturbation.hpp"
#include "convint/solver.hpp"
#include "convint/config.hpp"
