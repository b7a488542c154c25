// Copyright 2026 The deepgen authors
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

#ifndef DEEPGEN_DEEPGEN_HPP
#define DEEPGEN_DEEPGEN_HPP

/// \file
/// \brief Umbrella header pulling in the whole library.

#include "deepgen/adam.hpp"
#include "deepgen/config.hpp"
#include "deepgen/data.hpp"
#include "deepgen/errors.hpp"
#include "deepgen/estimators.hpp"
#include "deepgen/gibbs.hpp"
#include "deepgen/layers.hpp"
#include "deepgen/manifest.hpp"
#include "deepgen/metrics.hpp"
#include "deepgen/model.hpp"
#include "deepgen/numerics.hpp"
#include "deepgen/parallel.hpp"
#include "deepgen/pgm.hpp"
#include "deepgen/priors.hpp"
#include "deepgen/random.hpp"
#include "deepgen/sgnht.hpp"
#include "deepgen/train.hpp"

#endif  // DEEPGEN_DEEPGEN_HPP
