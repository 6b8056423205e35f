#pragma once

#include "certilind/commands.hpp"
#include "certilind/errors.hpp"
#include "certilind/estimators.hpp"
#include "certilind/expression.hpp"
#include "certilind/fockspace.hpp"
#include "certilind/lindblad.hpp"
#include "certilind/linalg.hpp"
#include "certilind/model_file.hpp"
#include "certilind/models.hpp"
#include "certilind/operators.hpp"
#include "certilind/output.hpp"
#include "certilind/solver.hpp"
