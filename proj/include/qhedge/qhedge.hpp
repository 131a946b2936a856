#pragma once

#include "qhedge/measure.hpp"
#include "qhedge/model.hpp"
#include "qhedge/report.hpp"
#include "qhedge/signal.hpp"
#include "qhedge/solver.hpp"
#include "qhedge/stats.hpp"
#include "qhedge/tree.hpp"
#include "qhedge/tree_io.hpp"

#define QHEDGE_VERSION "0.1.0"
