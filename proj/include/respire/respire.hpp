#pragma once

#include "respire/common.hpp"
#include "respire/environment.hpp"
#include "respire/models.hpp"
#include "respire/belief.hpp"
#include "respire/grid_cluster.hpp"
#include "respire/mi_reward.hpp"
#include "respire/hierarchy.hpp"
#include "respire/rbts.hpp"
#include "respire/harness/scenario.hpp"
#include "respire/harness/episode.hpp"
#include "respire/harness/ablation.hpp"
#include "respire/harness/mi_bench.hpp"
#include "respire/harness/report.hpp"
