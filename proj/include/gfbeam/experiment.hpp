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

#ifndef gfbeam_experiment_H
#define gfbeam_experiment_H

#include "gfbeam/beams.hpp"
#include "gfbeam/channel.hpp"
#include "gfbeam/evaluate.hpp"
#include "gfbeam/model.hpp"
#include "gfbeam/train.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gfbeam
{
    struct CodebookConfig
    {
        int tx_q_y = 2, tx_q_z = 2;
        int rx_q_y = 2, rx_q_z = 2;
        int topk = 3;
        void validate() const;
    };

    struct DatasetConfig
    {
        std::size_t num_samples = 10000;
        SplitFractions split;
        double train_nmse_db = -INFINITY; // -inf keeps the training channels clean
        void validate() const;
    };

    struct EvalConfig
    {
        std::vector<Method> methods{Method::dl_gf, Method::dl_cb_top1, Method::dl_cb_topk, Method::exhaustive,
                                    Method::genie, Method::dft_egc, Method::mrt_mrc};
        bool measurement_noise = true;
        bool linear_mean = false;
        std::uint64_t seed = 1;
    };

    struct SweepGrid
    {
        std::vector<int> n_probe;
        std::vector<double> gamma;
        std::vector<double> noise_psd;
        std::vector<double> nmse_db;
        std::vector<int> feedback_m;
    };

    struct ExperimentConfig
    {
        std::uint64_t seed = 1;
        std::string output_dir = "out";
        ScenarioConfig scenario;
        DatasetConfig dataset;
        LinkBudget budget;
        GfConfig gf;
        GfConfig cb;
        CodebookConfig codebook;
        TrainConfig train;
        EvalConfig eval;
        OverheadParams overhead;
        std::vector<int> k_values{1, 2, 5, 10, 20, 50};
        SweepGrid sweep;

        void validate() const;
    };

    // Unknown keys are rejected with ConfigError; absent keys keep their defaults.
    ExperimentConfig experiment_from_json(const nlohmann::json &j);
    nlohmann::json to_json(const ExperimentConfig &cfg);
    ExperimentConfig load_experiment_config(const std::filesystem::path &path);

    nlohmann::json to_json(const ScenarioConfig &cfg);
    ScenarioConfig scenario_from_json(const nlohmann::json &j);
    nlohmann::json to_json(const GfConfig &cfg);
    GfConfig gf_config_from_json(const nlohmann::json &j, const std::string &section = "model");
    nlohmann::json to_json(const TrainConfig &cfg);
    TrainConfig train_config_from_json(const nlohmann::json &j);

    // Lowercase hex SHA-256.
    std::string sha256_hex(std::string_view data);
    std::string sha256_file(const std::filesystem::path &path);
}

#endif
