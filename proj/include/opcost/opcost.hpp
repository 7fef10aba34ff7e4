#pragma once

#include "opcost/errors.hpp"
#include "opcost/domain_model.hpp"
#include "opcost/solvency.hpp"
#include "opcost/profit.hpp"
#include "opcost/constraints.hpp"
#include "opcost/calculus.hpp"
#include "opcost/optimizer.hpp"
#include "opcost/opportunity.hpp"
#include "opcost/oracle.hpp"
#include "opcost/io.hpp"
