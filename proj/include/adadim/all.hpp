#pragma once

#include "adadim/adadim.hpp"
#include "adadim/artifact.hpp"
#include "adadim/bench.hpp"
#include "adadim/error.hpp"
#include "adadim/gptq.hpp"
#include "adadim/linalg.hpp"
#include "adadim/npy.hpp"
#include "adadim/pack.hpp"
#include "adadim/pipeline.hpp"
#include "adadim/quant.hpp"
#include "adadim/report.hpp"
#include "adadim/synthetic.hpp"
#include "adadim/tensor.hpp"
