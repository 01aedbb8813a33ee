// Copyright 2026, The desnow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header. render.hpp is left out because it needs libpng.
#pragma once

#include "desnow/core/blank.hpp"
#include "desnow/core/checkpoint.hpp"
#include "desnow/core/losses.hpp"
#include "desnow/core/model.hpp"
#include "desnow/core/schedule.hpp"
#include "desnow/core/train.hpp"
#include "desnow/filters.hpp"
#include "desnow/geom.hpp"
#include "desnow/io.hpp"
#include "desnow/kdtree.hpp"
#include "desnow/nn/adam.hpp"
#include "desnow/nn/conv.hpp"
#include "desnow/nn/layers.hpp"
#include "desnow/nn/ops.hpp"
#include "desnow/nn/tensor.hpp"
#include "desnow/pipeline/dataset.hpp"
#include "desnow/pipeline/metrics.hpp"
#include "desnow/pipeline/postprocess.hpp"
#include "desnow/pipeline/split.hpp"
#include "desnow/pipeline/workflow.hpp"
#include "desnow/random.hpp"
#include "desnow/synth.hpp"
