// Copyright 2026 The DiRotQ Authors.
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

// Umbrella header for the core library (no JSON or file IO).

#ifndef DIROTQ_DIROTQ_HPP_
#define DIROTQ_DIROTQ_HPP_

#include "dirotq/calib.hpp"
#include "dirotq/error.hpp"
#include "dirotq/gptq.hpp"
#include "dirotq/judge.hpp"
#include "dirotq/linalg.hpp"
#include "dirotq/metrics.hpp"
#include "dirotq/pipeline.hpp"
#include "dirotq/quant.hpp"
#include "dirotq/rotation.hpp"
#include "dirotq/synth.hpp"

#endif  // DIROTQ_DIROTQ_HPP_
