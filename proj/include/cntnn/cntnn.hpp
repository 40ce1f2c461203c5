#pragma once

#include "cntnn/activation.hpp"
#include "cntnn/architecture.hpp"
#include "cntnn/cnt_data.hpp"
#include "cntnn/cnt_topological.hpp"
#include "cntnn/datasets.hpp"
#include "cntnn/digest.hpp"
#include "cntnn/experiment.hpp"
#include "cntnn/forward.hpp"
#include "cntnn/network.hpp"
#include "cntnn/population.hpp"
#include "cntnn/serialization.hpp"
#include "cntnn/stats.hpp"
#include "cntnn/tensor.hpp"
#include "cntnn/train.hpp"
