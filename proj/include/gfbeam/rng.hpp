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

#ifndef gfbeam_rng_H
#define gfbeam_rng_H

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gfbeam
{
    using Rng = std::mt19937_64;

    // SplitMix64 finalizer. Used to derive independent per-sample / per-batch
    // streams from one experiment seed so that work can be split across threads
    // without changing results.
    std::uint64_t mix_seed(std::uint64_t x);

    // Hash-combine a root seed with a sequence of stream tags.
    std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags);

    inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> tags)
    {
        return Rng(derive_seed(root, tags));
    }

    // Uniform on [lo, hi). Implemented on top of the raw engine output so the
    // stream is identical across standard library implementations.
    double uniform(Rng &rng, double lo, double hi);

    // Standard normal via Box-Muller on the raw engine output (portable stream).
    double normal(Rng &rng);
}

#endif
