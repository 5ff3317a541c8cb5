#pragma once

#include "cftrag/baselines.hpp"
#include "cftrag/bench.hpp"
#include "cftrag/bloom.hpp"
#include "cftrag/cuckoo_index.hpp"
#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/hash.hpp"
#include "cftrag/label.hpp"
#include "cftrag/retrieval.hpp"
#include "cftrag/snapshot.hpp"
