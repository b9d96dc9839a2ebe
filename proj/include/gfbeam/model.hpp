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

#ifndef gfbeam_model_H
#define gfbeam_model_H

#include "gfbeam/beams.hpp"
#include "gfbeam/channel.hpp"
#include "gfbeam/diffgraph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gfbeam
{
    enum class FeatureScale
    {
        linear,           // raw received powers
        log_standardized, // dB, then per-dimension standardization with training-set stats
    };

    struct GfConfig
    {
        int n_probe = 8;
        int hidden_width = 0; // 0 selects max(128, 4 n_probe)
        FeatureScale feature_scale = FeatureScale::log_standardized;
        double gamma = 0.3;
        double snr_threshold_db = -5.0;
        bool include_measurement_noise = true;
        std::optional<int> feedback_top_m;
        std::uint64_t seed = 1;

        void validate() const;
        int hidden() const { return hidden_width > 0 ? hidden_width : std::max(128, 4 * n_probe); }
    };

    struct FeatureStats
    {
        RVector mean, stddev;
        bool fitted() const { return mean.size() > 0; }
    };

    struct Measurement
    {
        RVector z; // received probing powers [W]
    };

    // Probing matrices F (N_T x N_probe) and W (N_R x N_probe) plus two MLP heads.
    // Parameter names: probe.{tx,rx}_{re,im}, then <head>.{w1,b1,w2,b2,w3,b3} per head.
    struct ProbingModel
    {
        GfConfig config;
        int n_t = 0, n_r = 0;
        diff::ParamBlock params;
        FeatureStats stats;

        CMatrix probing_tx() const; // projected, unit modulus
        CMatrix probing_rx() const;
        std::size_t index(std::string_view name) const { return params.index_of(name); }
    };

    // DL-GF: heads synth_t / synth_r output 2 N_T / 2 N_R values (real parts, then imaginary parts).
    struct GfModel : ProbingModel
    {
        static GfModel init(const GfConfig &cfg, int n_t, int n_r);
    };

    // DL-CB: heads class_t / class_r output M_T / M_R logits.
    struct CbModel : ProbingModel
    {
        int m_t = 0, m_r = 0;
        static CbModel init(const GfConfig &cfg, int n_t, int n_r, int m_t, int m_r);
    };

    // ---- batched graph building blocks (shared by training and evaluation) ----

    // Channels flattened row-major: column r * N_T + t of row b holds H_b(r, t).
    struct ChannelBatch
    {
        CMatrix h_flat;
        RVector energy; // ||H_b||_F^2
        std::vector<std::int64_t> ids;
        int n_r = 0, n_t = 0;

        static ChannelBatch from(std::span<const ChannelSample *const> samples);
        Eigen::Index size() const { return h_flat.rows(); }
    };

    // Per-sample receiver noise n_k (N_R entries per probe), drawn from the sample's own stream:
    // row b, columns k * N_R + r. Entries are CN(0, noise_power).
    CMatrix draw_probe_noise(const ChannelBatch &batch, int n_probe, double noise_power, std::uint64_t seed);

    struct ProbeNodes
    {
        diff::CVar f, w;         // projected probing matrices
        diff::CVar clean;        // B x K, w_k^H H_b f_k
        diff::Var clean_gain;    // B x K, |w_k^H H_b f_k|^2
        diff::Var z;             // B x K measured powers
    };

    ProbeNodes probe_graph(const ProbingModel &m, std::span<const diff::Var> leaves, const ChannelBatch &batch,
                           const LinkBudget &budget, const CMatrix *noise);

    // top-m masking (constant mask from the values), then the configured scaling. In log_standardized mode
    // masked entries are zero after standardization.
    diff::Var feature_graph(const ProbingModel &m, const diff::Var &z);

    // 2 hidden ReLU layers + linear output.
    diff::Var mlp_graph(const ProbingModel &m, std::span<const diff::Var> leaves, std::string_view head,
                        const diff::Var &x);

    struct SynthNodes
    {
        diff::CVar v_t, v_r; // B x N_T, B x N_R unit modulus
    };

    SynthNodes synth_graph(const GfModel &m, std::span<const diff::Var> leaves, const diff::Var &features);

    // |v_R^H H v_T|^2 per sample (B x 1) given per-row beams.
    diff::Var pair_gain_graph(const ChannelBatch &batch, const diff::CVar &v_t, const diff::CVar &v_r);

    struct UtilityNodes
    {
        diff::Var utility;
        diff::Var u_bf;
        std::optional<diff::Var> u_ia; // absent when every sample clears the threshold
        int below_threshold = 0;
        ProbeNodes probe;
        SynthNodes synth;
    };

    UtilityNodes utility_graph(const GfModel &m, std::span<const diff::Var> leaves, const ChannelBatch &batch,
                               const LinkBudget &budget, const CMatrix *noise);

    // ---- per-sample operations ----

    // Measurement noise is drawn iff config.include_measurement_noise; the seed defaults to config.seed.
    Measurement probe_forward(const ProbingModel &m, const ChannelSample &h, const LinkBudget &budget,
                              std::optional<std::uint64_t> noise_seed = std::nullopt);

    RVector featurize(const ProbingModel &m, const Measurement &z);

    Measurement mask_top_m(const Measurement &z, int m);

    std::pair<CVector, CVector> synthesize(const GfModel &m, const Measurement &z);

    struct UtilityValue
    {
        double utility = 0.0, u_bf = 0.0, u_ia = 0.0;
        int below_threshold = 0;
    };

    UtilityValue utility(const GfModel &m, std::span<const ChannelSample *const> batch, const LinkBudget &budget,
                         std::uint64_t noise_seed);

    std::pair<RVector, RVector> cb_forward(const CbModel &m, const Measurement &z);

    // Summed cross-entropy of both heads (batch mean per head).
    diff::Var cb_loss(const diff::Var &logits_t, const diff::Var &logits_r, std::span<const int> label_t,
                      std::span<const int> label_r);

    // Fits per-dimension dB mean/std of noiseless probing powers (std floors at 1e-6 dB).
    void fit_feature_stats(ProbingModel &m, std::span<const ChannelSample *const> train, const LinkBudget &budget);

    // ---- persistence ----
    void save_model(const GfModel &m, const std::filesystem::path &path);
    void save_model(const CbModel &m, const std::filesystem::path &path);
    GfModel load_gf_model(const std::filesystem::path &path);
    CbModel load_cb_model(const std::filesystem::path &path);

    enum class ModelKind
    {
        gf,
        cb
    };

    // Reads the file magic only.
    ModelKind model_kind(const std::filesystem::path &path);
}

#endif
