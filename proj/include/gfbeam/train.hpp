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

#ifndef gfbeam_train_H
#define gfbeam_train_H

#include "gfbeam/beams.hpp"
#include "gfbeam/channel.hpp"
#include "gfbeam/diffgraph.hpp"
#include "gfbeam/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace gfbeam
{
    struct AdamState
    {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        std::int64_t step = 0;
        std::vector<diff::Tensor> m, v;
    };

    // One bias-corrected Adam descent step on params along grads.
    void adam_step(AdamState &state, diff::ParamBlock &params, const diff::Gradients &grads);

    struct TrainConfig
    {
        int epochs = 4000;
        int batch_size = 800;
        double lr = 1e-3;
        std::uint64_t seed = 1;
        bool shuffle = true;
        int log_every = 0; // 0 disables progress logging
        void validate() const;
    };

    struct HistoryRow
    {
        int epoch = 0;
        double train_utility = 0.0; // DL-GF: mean batch utility; DL-CB: minus the mean batch cross-entropy
        double val_ubf = 0.0;
        double val_avg_snr_db = 0.0;
        double val_misdetection = 0.0;
    };

    template <class M>
    struct TrainResult
    {
        M model;
        std::vector<HistoryRow> history;
        int best_epoch = 0;
    };

    using ProgressFn = std::function<void(const HistoryRow &)>;

    // Noise seed of the per-epoch validation pass.
    std::uint64_t validation_noise_seed(const TrainConfig &cfg);

    TrainResult<GfModel> train_gf(const Dataset &ds, const LinkBudget &budget, const GfConfig &gf_cfg,
                                  const TrainConfig &tr_cfg, const ProgressFn &progress = {});

    struct Labels
    {
        std::vector<int> tx, rx; // one entry per dataset sample
    };

    Labels label_dataset(const Dataset &ds, const Codebook &cb_t, const Codebook &cb_r);

    TrainResult<CbModel> train_cb(const Dataset &ds, const LinkBudget &budget, const GfConfig &cb_cfg,
                                  const TrainConfig &tr_cfg, const Codebook &cb_t, const Codebook &cb_r,
                                  const Labels &labels, const ProgressFn &progress = {});

    void write_history_csv(const std::filesystem::path &path, std::span<const HistoryRow> history);
}

#endif
