#pragma once

#include "malfeed/core.hpp"
#include "malfeed/csv.hpp"
#include "malfeed/parallel.hpp"
#include "malfeed/ingest.hpp"
#include "malfeed/enrich.hpp"
#include "malfeed/hosts.hpp"
#include "malfeed/entropy.hpp"
#include "malfeed/churn.hpp"
#include "malfeed/survival.hpp"
#include "malfeed/stats.hpp"
#include "malfeed/labeler.hpp"
#include "malfeed/simgen.hpp"
#include "malfeed/summary.hpp"
