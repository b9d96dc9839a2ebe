// SPDX-License-Identifier: Apache-2.0
//
// gfbeam - grid-free MIMO beam alignment simulator and training library
// Copyright (C) 2026 The gfbeam authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "gfbeam/rng.hpp"

#include <cmath>

namespace gfbeam
{
    std::uint64_t mix_seed(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags)
    {
        std::uint64_t s = mix_seed(root);
        for (auto t : tags)
            s = mix_seed(s ^ mix_seed(t + 0x632be59bd9b4e019ULL));
        return s;
    }

    double uniform(Rng &rng, double lo, double hi)
    {
        // 53 random mantissa bits -> [0, 1)
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    double normal(Rng &rng)
    {
        double u1 = 0.0;
        while (u1 <= 0.0)
            u1 = uniform(rng, 0.0, 1.0);
        const double u2 = uniform(rng, 0.0, 1.0);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
}
