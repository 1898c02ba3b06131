#pragma once

#include "biaslens/config.hpp"
#include "biaslens/cooccur.hpp"
#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/evaluate.hpp"
#include "biaslens/explicit.hpp"
#include "biaslens/glove.hpp"
#include "biaslens/lexicon.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/log.hpp"
#include "biaslens/measures.hpp"
#include "biaslens/model.hpp"
#include "biaslens/pipeline.hpp"
#include "biaslens/random.hpp"
#include "biaslens/report.hpp"
#include "biaslens/sgns.hpp"
#include "biaslens/stats.hpp"
#include "biaslens/synthetic.hpp"
#include "biaslens/textio.hpp"
#include "biaslens/view.hpp"
