#pragma once

// Umbrella header.

#include "roboabstain/cache.hpp"
#include "roboabstain/category.hpp"
#include "roboabstain/config.hpp"
#include "roboabstain/constraints.hpp"
#include "roboabstain/dataset.hpp"
#include "roboabstain/error.hpp"
#include "roboabstain/evaluation.hpp"
#include "roboabstain/grounding.hpp"
#include "roboabstain/hash.hpp"
#include "roboabstain/http_transport.hpp"
#include "roboabstain/image.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/judge.hpp"
#include "roboabstain/manifest.hpp"
#include "roboabstain/metrics.hpp"
#include "roboabstain/pipeline.hpp"
#include "roboabstain/prompts.hpp"
#include "roboabstain/report.hpp"
#include "roboabstain/rng.hpp"
#include "roboabstain/scene.hpp"
#include "roboabstain/templates.hpp"
#include "roboabstain/transport.hpp"
#include "roboabstain/verdict.hpp"
#include "roboabstain/vocab.hpp"
