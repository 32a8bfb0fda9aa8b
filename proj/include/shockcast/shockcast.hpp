#pragma once

#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"
#include "shockcast/text_io.hpp"
#include "shockcast/embedding.hpp"
#include "shockcast/data_ingest.hpp"
#include "shockcast/news_agent.hpp"
#include "shockcast/reduce.hpp"
#include "shockcast/nn_core.hpp"
#include "shockcast/model.hpp"
#include "shockcast/checkpoint.hpp"
#include "shockcast/eval.hpp"
#include "shockcast/synthetic.hpp"
