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

#ifndef gfbeam_pipeline_H
#define gfbeam_pipeline_H

#include "gfbeam/experiment.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gfbeam
{
    // Replaces the scenario, model, training and evaluation seeds by values derived from root.
    void apply_root_seed(ExperimentConfig &cfg, std::uint64_t root);

    // Generation and split both keyed by scenario.seed.
    Dataset generate_dataset(const ExperimentConfig &cfg);

    // DFT codebooks for the scenario arrays. Throws ConfigError if ds is given and its shape differs.
    std::pair<Codebook, Codebook> make_codebooks(const ExperimentConfig &cfg, const Dataset *ds = nullptr);

    // Copy of ds with the train split corrupted to dataset.train_nmse_db (noise keyed by the root seed).
    Dataset training_view(const Dataset &ds, const ExperimentConfig &cfg);

    // Rotation flag from the dataset header when it carries a scenario, else from cfg.
    bool dataset_rotation_enabled(const Dataset &ds, const ExperimentConfig &cfg);

    RunContext run_context(const ExperimentConfig &cfg, bool rotation_enabled);

    // Overhead parameters with M_T, M_R and k taken from the codebooks in use.
    OverheadParams overhead_params(const ExperimentConfig &cfg, const Codebook &cb_t, const Codebook &cb_r);

    struct PointResult
    {
        std::optional<TrainResult<GfModel>> gf;
        std::optional<TrainResult<CbModel>> cb;
        std::vector<EvalRecord> records;
        std::vector<SummaryRow> summary;
        std::vector<SpeedRow> speed;
        RunContext context;
        std::optional<double> misdetection_gf, misdetection_cb;
    };

    // Trains the models the configured methods need, then evaluates on eval_split.
    PointResult run_point(const ExperimentConfig &cfg, const Dataset &ds, Split eval_split = Split::test,
                          const ProgressFn &progress = {});

    struct EvalOutputs
    {
        std::vector<EvalRecord> records;
        std::vector<SummaryRow> summary;
        std::vector<SpeedRow> speed;
        std::optional<double> misdetection_gf, misdetection_cb;
    };

    // Evaluation only; models may be null when no method needs them.
    EvalOutputs evaluate_models(const ExperimentConfig &cfg, const Dataset &ds, Split eval_split, const GfModel *gf,
                                const CbModel *cb, const RunContext &ctx);

    enum class SweepAxis
    {
        n_probe,
        gamma,
        noise_psd,
        nmse,
        feedback_m,
        rotation,
    };

    SweepAxis parse_axis(std::string_view name);
    const char *axis_name(SweepAxis a);

    // Grid values from the config sweep section (rotation: on, off).
    std::vector<std::string> default_grid(const ExperimentConfig &cfg, SweepAxis axis);

    // Copy of cfg with one grid value applied. Rotation "off" zeroes the orientation ranges.
    ExperimentConfig apply_axis(const ExperimentConfig &cfg, SweepAxis axis, const std::string &value);
}

#endif
