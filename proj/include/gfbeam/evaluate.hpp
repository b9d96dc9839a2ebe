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

#ifndef gfbeam_evaluate_H
#define gfbeam_evaluate_H

#include "gfbeam/beams.hpp"
#include "gfbeam/channel.hpp"
#include "gfbeam/model.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gfbeam
{
    enum class Method
    {
        dl_gf,
        dl_cb_top1,
        dl_cb_topk,
        exhaustive,
        genie,
        dft_egc,
        mrt_mrc,
        hierarchical, // overhead accounting only
    };

    const char *method_name(Method m);
    Method parse_method(std::string_view name);

    struct EvalRecord
    {
        std::int64_t sample_id = 0;
        Method method = Method::genie;
        double snr_db = 0.0;
        double normalized_gain = 0.0;
        std::optional<double> best_probe_snr_db;
    };

    struct OverheadParams
    {
        int k_ues = 1;
        int n_probe = 32;
        int m_t = 256, m_r = 64;
        int n_f_wide = 8, n_w_wide = 8;
        int cb_topk_per_dim = 3;
        void validate() const;
    };

    struct BeamPair
    {
        int tx = 0, rx = 0;
        bool operator==(const BeamPair &) const = default;
    };

    // M_R x M_T matrix of |w_r^H h f_t|^2.
    RMatrix codebook_gains(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r);

    // Noiseless best pair; ties go to the lexicographically smallest (tx, rx).
    BeamPair genie_select(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r);

    // Measurement noise of pair (tx, rx) is w^H n, drawn as CN(0, sigma^2) (||w|| = 1) from a
    // counter-based stream keyed by (seed, tx, rx), so any subset of pairs sees the same draws.
    cplx pair_noise(std::uint64_t seed, int tx, int rx, int m_r, double noise_power);

    BeamPair exhaustive_search(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r, const LinkBudget &budget,
                               std::uint64_t seed);

    struct EgcSelection
    {
        int tx = 0;
        CVector w;
        double gain = 0.0;
    };

    EgcSelection dft_egc_select(const CMatrix &h, const Codebook &cb_t);

    // Indices of the k largest entries, ties to the lower index, in descending score order.
    std::vector<int> top_k_indices(const RVector &scores, int k);

    BeamPair cb_topk_select(const CbModel &cb, const CMatrix &h, const Measurement &z, int k,
                            const Codebook &cb_t, const Codebook &cb_r, const LinkBudget &budget, std::uint64_t seed);

    // Fraction of samples whose best deterministic probing SNR is below the threshold.
    double misdetection_probability(const ProbingModel &m, std::span<const ChannelSample *const> samples,
                                    const LinkBudget &budget, double snr_threshold_db);

    struct SnrSummary
    {
        double p10 = 0.0, p50 = 0.0, p90 = 0.0, mean = 0.0;
    };

    // Linear-interpolation percentiles of the dB values; mean in dB unless linear_mean.
    SnrSummary snr_percentiles(std::span<const double> snr_db, bool linear_mean = false);
    SnrSummary snr_percentiles(std::span<const EvalRecord> records, bool linear_mean = false);

    std::int64_t sweeping_overhead(Method method, const OverheadParams &p);

    // ---- batched model inference ----

    struct GfPrediction
    {
        CMatrix v_t, v_r;               // one row per sample
        std::vector<double> snr_db;     // synthesized pair, deterministic SNR
        std::vector<double> norm_gain;  // |v_R^H H v_T|^2 / ||H||^2
        std::vector<double> best_probe_snr_db;
        RMatrix z;                      // measured probing powers
    };

    // Measurement noise is drawn per sample from (seed, sample id) when measurement_noise is set.
    GfPrediction predict_gf(const GfModel &m, std::span<const ChannelSample *const> samples, const LinkBudget &budget,
                            std::uint64_t seed, bool measurement_noise);

    struct CbPrediction
    {
        RMatrix logits_t, logits_r;
        RMatrix z;
        std::vector<double> best_probe_snr_db;
    };

    CbPrediction predict_cb(const CbModel &m, std::span<const ChannelSample *const> samples, const LinkBudget &budget,
                            std::uint64_t seed, bool measurement_noise);

    // ---- experiment evaluation ----

    struct EvalSetup
    {
        std::vector<Method> methods;
        const GfModel *gf = nullptr;
        const CbModel *cb = nullptr;
        const Codebook *cb_t = nullptr;
        const Codebook *cb_r = nullptr;
        int cb_topk = 3;
        LinkBudget budget;
        std::uint64_t seed = 1;
        bool measurement_noise = true;
    };

    // Runs every method on every sample. Records are sorted by (method, sample_id).
    std::vector<EvalRecord> evaluate_all(const EvalSetup &setup, std::span<const ChannelSample *const> samples);

    // Columns shared by the results and summary CSVs.
    struct RunContext
    {
        int n_probe = 0;
        double gamma = 0.0;
        double noise_psd_dbm_hz = -173.0;
        double train_nmse_db = -INFINITY;
        int feedback_m = 0; // 0 = no masking
        bool rotation_enabled = true;
    };

    struct SummaryRow
    {
        Method method = Method::genie;
        RunContext context;
        int k_ues = 1;
        SnrSummary snr;
        std::optional<double> misdetection;
        std::int64_t overhead = 0;
        double speed = 0.0;
        std::size_t samples = 0;
    };

    std::vector<SummaryRow> summarize(std::span<const EvalRecord> records, const RunContext &ctx,
                                      const OverheadParams &overhead, std::optional<double> misdetection_gf,
                                      std::optional<double> misdetection_cb, bool linear_mean = false);

    struct SpeedRow
    {
        Method method = Method::genie;
        int n_probe = 0;
        int k_ues = 1;
        std::int64_t overhead = 0;
        double speed = 0.0;
        double avg_snr_db = 0.0;
    };

    // Joins average SNR per method with the sweeping overhead for each K.
    std::vector<SpeedRow> snr_vs_speed(std::span<const SummaryRow> rows, std::span<const int> k_values,
                                       const OverheadParams &p);

    void write_records_csv(const std::filesystem::path &path, std::span<const EvalRecord> records,
                           const RunContext &ctx);
    void write_summary_csv(const std::filesystem::path &path, std::span<const SummaryRow> rows);
    void write_speed_csv(const std::filesystem::path &path, std::span<const SpeedRow> rows);

    std::string format_double(double v);
}

#endif
