#pragma once

#include "trim/analytics.hpp"
#include "trim/engine.hpp"
#include "trim/engine_config.hpp"
#include "trim/errors.hpp"
#include "trim/oracle.hpp"
#include "trim/pipeline.hpp"
#include "trim/report.hpp"
#include "trim/slice.hpp"
#include "trim/tensor.hpp"
#include "trim/tensor_io.hpp"
#include "trim/workload.hpp"
