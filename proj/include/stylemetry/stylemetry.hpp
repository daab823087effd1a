// Copyright 2026 The Stylemetry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STYLEMETRY_STYLEMETRY_HPP
#define STYLEMETRY_STYLEMETRY_HPP

#include "stylemetry/arnet.hpp"
#include "stylemetry/checkpoint.hpp"
#include "stylemetry/clusteval.hpp"
#include "stylemetry/experiments.hpp"
#include "stylemetry/featurize.hpp"
#include "stylemetry/ingest.hpp"
#include "stylemetry/nn/adadelta.hpp"
#include "stylemetry/nn/gradcheck.hpp"
#include "stylemetry/nn/layers.hpp"
#include "stylemetry/nn/loss.hpp"
#include "stylemetry/nn/tensor.hpp"
#include "stylemetry/pipeline.hpp"
#include "stylemetry/synthetic.hpp"
#include "stylemetry/trip2vec.hpp"

#endif  // STYLEMETRY_STYLEMETRY_HPP
