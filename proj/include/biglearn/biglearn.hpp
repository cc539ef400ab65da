// biglearn/biglearn.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef BIGLEARN_BIGLEARN_HPP_
#define BIGLEARN_BIGLEARN_HPP_

#include "biglearn/dataset.hpp"
#include "biglearn/em.hpp"
#include "biglearn/errors.hpp"
#include "biglearn/experiments.hpp"
#include "biglearn/gaussian.hpp"
#include "biglearn/gmm.hpp"
#include "biglearn/metrics.hpp"
#include "biglearn/rng.hpp"

#endif  // BIGLEARN_BIGLEARN_HPP_
