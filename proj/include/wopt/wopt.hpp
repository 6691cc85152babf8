#pragma once

#include "wopt/config.hpp"
#include "wopt/control.hpp"
#include "wopt/diagnostics.hpp"
#include "wopt/errors.hpp"
#include "wopt/expr.hpp"
#include "wopt/fields.hpp"
#include "wopt/io.hpp"
#include "wopt/mesh.hpp"
#include "wopt/objective.hpp"
#include "wopt/optimizer.hpp"
#include "wopt/solver.hpp"
#include "wopt/sparse.hpp"
#include "wopt/version.hpp"
