#pragma once

#include "hyperhier/directions.hpp"
#include "hyperhier/embed.hpp"
#include "hyperhier/error.hpp"
#include "hyperhier/graph_dict.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/llm_gateway.hpp"
#include "hyperhier/metrics.hpp"
#include "hyperhier/pipeline.hpp"
#include "hyperhier/poincare.hpp"
#include "hyperhier/restructure.hpp"
