#pragma once

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/correlation.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/evaluation.hpp"
#include "trace_profiler/fvcu.hpp"
#include "trace_profiler/metrics.hpp"
#include "trace_profiler/prompts.hpp"
#include "trace_profiler/providers/provider_set.hpp"
#include "trace_profiler/sampling.hpp"
