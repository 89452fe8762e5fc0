#pragma once

#include "questforge/stage.hpp"
#include "questforge/json_extract.hpp"
#include "questforge/schema.hpp"
#include "questforge/run_state.hpp"
#include "questforge/prompts.hpp"
#include "questforge/provider.hpp"
#include "questforge/http_provider.hpp"
#include "questforge/config.hpp"
#include "questforge/manifest.hpp"
#include "questforge/store.hpp"
#include "questforge/pipeline.hpp"
#include "questforge/graph.hpp"
#include "questforge/consistency.hpp"
#include "questforge/evalkit.hpp"
