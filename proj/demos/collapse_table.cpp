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

// Prints how the largest normalized weight grows with the observation dimension
// at a fixed ensemble size.

#include <cstdio>

#include <pfcollapse.hpp>

int main() {
  pfcollapse::ExperimentConfig cfg;
  cfg.name = "collapse-table";
  cfg.d_prime_grid = {5, 30, 100, 300};
  cfg.n_grid = {1000};
  cfg.replicates = 50;
  cfg.master_seed = 7;

  std::printf("%6s %8s %12s %12s\n", "d'", "n", "max_weight", "ess");
  for (const auto& c : pfcollapse::run_collapse_sweep(cfg)) {
    std::printf("%6zu %8zu %12.4f %12.1f\n", c.d_prime, c.n, c.max_weight.mean, c.ess.mean);
  }
  return 0;
}
