// Copyright 2026 The pfcollapse Authors
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


#ifndef PFCOLLAPSE_PFCOLLAPSE_HPP
#define PFCOLLAPSE_PFCOLLAPSE_HPP

/**
 * \file
 * \brief Includes the whole library except the command-line front end.
 */

#include <pfcollapse/config.hpp>
#include <pfcollapse/csv.hpp>
#include <pfcollapse/errors.hpp>
#include <pfcollapse/harness.hpp>
#include <pfcollapse/parallel.hpp>
#include <pfcollapse/particle_filter.hpp>
#include <pfcollapse/quadrature.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/sampling.hpp>
#include <pfcollapse/spectrum.hpp>
#include <pfcollapse/statistics.hpp>
#include <pfcollapse/version.hpp>
#include <pfcollapse/weights.hpp>

#endif
