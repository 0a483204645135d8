// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cdiff/barrier.hpp"
#include "cdiff/checkpoint.hpp"
#include "cdiff/domain_io.hpp"
#include "cdiff/error.hpp"
#include "cdiff/eval.hpp"
#include "cdiff/geometry.hpp"
#include "cdiff/io.hpp"
#include "cdiff/mlp.hpp"
#include "cdiff/random.hpp"
#include "cdiff/reflected.hpp"
#include "cdiff/sampling.hpp"
#include "cdiff/schedule.hpp"
#include "cdiff/score.hpp"
#include "cdiff/train.hpp"
#include "cdiff/trajectory.hpp"
#include "cdiff/types.hpp"
