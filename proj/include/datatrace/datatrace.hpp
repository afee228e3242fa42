#pragma once

#include "datatrace/error.hpp"
#include "datatrace/text.hpp"
#include "datatrace/csv.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/catalog.hpp"
#include "datatrace/http_cache.hpp"
#include "datatrace/harvester.hpp"
#include "datatrace/fulltext.hpp"
#include "datatrace/acquisition.hpp"
#include "datatrace/detector.hpp"
#include "datatrace/analyzer.hpp"
#include "datatrace/reporter.hpp"
#include "datatrace/annotation.hpp"
