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

#include "gfbeam/model.hpp"
#include "gfbeam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfbeam
{
    using diff::CVar;
    using diff::Tape;
    using diff::Tensor;
    using diff::Var;

    namespace
    {
        constexpr double kPowerFloor = 1e-30;

        void add_mlp(diff::ParamBlock &p, const std::string &head, int in, int hidden, int out, Rng &rng)
        {
            auto dense = [&](int fan_in, int fan_out) {
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                Tensor w(fan_in, fan_out);
                for (Eigen::Index j = 0; j < w.cols(); ++j)
                    for (Eigen::Index i = 0; i < w.rows(); ++i)
                        w(i, j) = uniform(rng, -bound, bound);
                return w;
            };
            p.add(head + ".w1", dense(in, hidden));
            p.add(head + ".b1", Tensor::Zero(1, hidden));
            p.add(head + ".w2", dense(hidden, hidden));
            p.add(head + ".b2", Tensor::Zero(1, hidden));
            p.add(head + ".w3", dense(hidden, out));
            p.add(head + ".b3", Tensor::Zero(1, out));
        }

        void add_probing(diff::ParamBlock &p, int n_t, int n_r, int k, Rng &rng)
        {
            auto raw = [&](int n) {
                const double s = 1.0 / std::sqrt(static_cast<double>(n));
                Tensor m(n, k);
                for (Eigen::Index j = 0; j < m.cols(); ++j)
                    for (Eigen::Index i = 0; i < m.rows(); ++i)
                        m(i, j) = s * uniform(rng, -1.0, 1.0);
                return m;
            };
            p.add("probe.tx_re", raw(n_t));
            p.add("probe.tx_im", raw(n_t));
            p.add("probe.rx_re", raw(n_r));
            p.add("probe.rx_im", raw(n_r));
        }

        CMatrix project_columns(const Tensor &re, const Tensor &im)
        {
            CMatrix raw(re.rows(), re.cols());
            raw.real() = re;
            raw.imag() = im;
            CMatrix out(raw.rows(), raw.cols());
            for (Eigen::Index j = 0; j < raw.cols(); ++j)
                out.col(j) = unit_modulus_project(raw.col(j));
            return out;
        }

        Tensor top_m_mask(const Tensor &z, int m)
        {
            Tensor mask = Tensor::Zero(z.rows(), z.cols());
            std::vector<Eigen::Index> order(static_cast<std::size_t>(z.cols()));
            for (Eigen::Index r = 0; r < z.rows(); ++r)
            {
                std::iota(order.begin(), order.end(), Eigen::Index{0});
                std::stable_sort(order.begin(), order.end(),
                                 [&](Eigen::Index a, Eigen::Index b) { return z(r, a) > z(r, b); });
                for (int i = 0; i < m; ++i)
                    mask(r, order[static_cast<std::size_t>(i)]) = 1.0;
            }
            return mask;
        }

        const Var &leaf(const ProbingModel &m, std::span<const Var> leaves, std::string_view name)
        {
            return leaves[m.index(name)];
        }

        std::vector<const ChannelSample *> single(const ChannelSample &s) { return {&s}; }

        RVector row_vector(const Tensor &t) { return t.row(0).transpose(); }
    }

    void GfConfig::validate() const
    {
        if (n_probe < 1)
            throw ConfigError("n_probe must be at least 1.");
        if (hidden_width < 0)
            throw ConfigError("hidden_width must be non-negative (0 selects the default).");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw ConfigError("gamma must lie in [0, 1].");
        if (feedback_top_m && (*feedback_top_m < 1 || *feedback_top_m > n_probe))
            throw ConfigError("feedback_top_m must lie in [1, n_probe].");
    }

    CMatrix ProbingModel::probing_tx() const
    {
        return project_columns(params["probe.tx_re"], params["probe.tx_im"]);
    }

    CMatrix ProbingModel::probing_rx() const
    {
        return project_columns(params["probe.rx_re"], params["probe.rx_im"]);
    }

    GfModel GfModel::init(const GfConfig &cfg, int n_t, int n_r)
    {
        cfg.validate();
        if (n_t < 1 || n_r < 1)
            throw ConfigError("GfModel: array sizes must be positive.");
        GfModel m;
        m.config = cfg;
        m.n_t = n_t;
        m.n_r = n_r;
        Rng rng = make_rng(cfg.seed, {0x696e6974ULL});
        add_probing(m.params, n_t, n_r, cfg.n_probe, rng);
        add_mlp(m.params, "synth_t", cfg.n_probe, cfg.hidden(), 2 * n_t, rng);
        add_mlp(m.params, "synth_r", cfg.n_probe, cfg.hidden(), 2 * n_r, rng);
        return m;
    }

    CbModel CbModel::init(const GfConfig &cfg, int n_t, int n_r, int m_t, int m_r)
    {
        cfg.validate();
        if (n_t < 1 || n_r < 1 || m_t < 1 || m_r < 1)
            throw ConfigError("CbModel: array and codebook sizes must be positive.");
        CbModel m;
        m.config = cfg;
        m.n_t = n_t;
        m.n_r = n_r;
        m.m_t = m_t;
        m.m_r = m_r;
        Rng rng = make_rng(cfg.seed, {0x696e6974ULL});
        add_probing(m.params, n_t, n_r, cfg.n_probe, rng);
        add_mlp(m.params, "class_t", cfg.n_probe, cfg.hidden(), m_t, rng);
        add_mlp(m.params, "class_r", cfg.n_probe, cfg.hidden(), m_r, rng);
        return m;
    }

    ChannelBatch ChannelBatch::from(std::span<const ChannelSample *const> samples)
    {
        if (samples.empty())
            throw ConfigError("ChannelBatch: empty batch.");
        ChannelBatch b;
        b.n_r = static_cast<int>(samples[0]->h.rows());
        b.n_t = static_cast<int>(samples[0]->h.cols());
        const auto n = static_cast<Eigen::Index>(samples.size());
        b.h_flat.resize(n, static_cast<Eigen::Index>(b.n_r) * b.n_t);
        b.energy.resize(n);
        b.ids.reserve(samples.size());
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const CMatrix &h = samples[static_cast<std::size_t>(i)]->h;
            if (h.rows() != b.n_r || h.cols() != b.n_t)
                throw ConfigError("ChannelBatch: inconsistent channel dimensions.");
            for (int r = 0; r < b.n_r; ++r)
                b.h_flat.row(i).segment(static_cast<Eigen::Index>(r) * b.n_t, b.n_t) = h.row(r);
            b.energy(i) = h.squaredNorm();
            b.ids.push_back(samples[static_cast<std::size_t>(i)]->id);
        }
        return b;
    }

    CMatrix draw_probe_noise(const ChannelBatch &batch, int n_probe, double noise_power, std::uint64_t seed)
    {
        const double sigma = std::sqrt(noise_power / 2.0);
        CMatrix n(batch.size(), static_cast<Eigen::Index>(n_probe) * batch.n_r);
        for (Eigen::Index b = 0; b < batch.size(); ++b)
        {
            Rng rng = make_rng(seed, {0x6e6f697365ULL, static_cast<std::uint64_t>(batch.ids[static_cast<std::size_t>(b)])});
            for (Eigen::Index c = 0; c < n.cols(); ++c)
            {
                const double re = sigma * normal(rng);
                const double im = sigma * normal(rng);
                n(b, c) = cplx(re, im);
            }
        }
        return n;
    }

    ProbeNodes probe_graph(const ProbingModel &m, std::span<const Var> leaves, const ChannelBatch &batch,
                           const LinkBudget &budget, const CMatrix *noise)
    {
        if (batch.n_t != m.n_t || batch.n_r != m.n_r)
            throw ConfigError("probe_graph: channel dimensions do not match the model.");
        Tape &t = *leaves[0].tape();
        ProbeNodes p;
        p.f = diff::modulus_normalize({leaf(m, leaves, "probe.tx_re"), leaf(m, leaves, "probe.tx_im")}, m.n_t);
        p.w = diff::modulus_normalize({leaf(m, leaves, "probe.rx_re"), leaf(m, leaves, "probe.rx_im")}, m.n_r);

        // Row k holds conj(w_k) (x) f_k, so H_flat * rows^T gives w_k^H H f_k for every (b, k).
        const CVar pair_rows = diff::kron_conj_rows(diff::ctranspose(p.w), diff::ctranspose(p.f));
        const CVar h = diff::cconstant(t, batch.h_flat);
        p.clean = diff::cmatmul(h, diff::ctranspose(pair_rows));
        p.clean_gain = diff::abs2(p.clean);

        CVar y = diff::cscale(p.clean, std::sqrt(budget.tx_power_w()));
        if (noise)
        {
            if (noise->rows() != batch.size() || noise->cols() != static_cast<Eigen::Index>(m.config.n_probe) * m.n_r)
                throw ConfigError("probe_graph: noise matrix has the wrong shape.");
            const CVar wn = diff::cmatmul(diff::cconstant(t, *noise), diff::ccolumn_blocks(diff::conj(p.w)));
            y = diff::cadd(y, wn);
        }
        p.z = diff::abs2(y);
        return p;
    }

    Var feature_graph(const ProbingModel &m, const Var &z)
    {
        Tape &t = *z.tape();
        std::optional<Var> mask;
        if (m.config.feedback_top_m)
            mask = t.constant(top_m_mask(z.value(), *m.config.feedback_top_m));
        if (m.config.feature_scale == FeatureScale::linear)
            return mask ? diff::mul(z, *mask) : z;
        if (!m.stats.fitted())
            throw ConfigError("featurize: feature statistics are not fitted (log_standardized mode).");
        Var x = diff::scale(diff::log10_safe(mask ? diff::mul(z, *mask) : z, kPowerFloor), 10.0);
        x = diff::add_row(x, t.constant(-m.stats.mean.transpose()));
        x = diff::mul_row(x, t.constant(m.stats.stddev.cwiseInverse().transpose()));
        // masked entries stay zero in the standardized domain
        return mask ? diff::mul(x, *mask) : x;
    }

    Var mlp_graph(const ProbingModel &m, std::span<const Var> leaves, std::string_view head, const Var &x)
    {
        const std::string h(head);
        auto layer = [&](const Var &in, const char *w, const char *b) {
            return diff::add_row(diff::matmul(in, leaf(m, leaves, h + w)), leaf(m, leaves, h + b));
        };
        const Var h1 = diff::relu(layer(x, ".w1", ".b1"));
        const Var h2 = diff::relu(layer(h1, ".w2", ".b2"));
        return layer(h2, ".w3", ".b3");
    }

    SynthNodes synth_graph(const GfModel &m, std::span<const Var> leaves, const Var &features)
    {
        const Var out_t = mlp_graph(m, leaves, "synth_t", features);
        const Var out_r = mlp_graph(m, leaves, "synth_r", features);
        SynthNodes s;
        s.v_t = diff::modulus_normalize({diff::slice_cols(out_t, 0, m.n_t), diff::slice_cols(out_t, m.n_t, m.n_t)}, m.n_t);
        s.v_r = diff::modulus_normalize({diff::slice_cols(out_r, 0, m.n_r), diff::slice_cols(out_r, m.n_r, m.n_r)}, m.n_r);
        return s;
    }

    Var pair_gain_graph(const ChannelBatch &batch, const CVar &v_t, const CVar &v_r)
    {
        Tape &t = *v_t.re.tape();
        const CVar outer = diff::kron_conj_rows(v_r, v_t); // conj(v_R[r]) v_T[t] at r * N_T + t
        const CVar prod = diff::cmul(diff::cconstant(t, batch.h_flat), outer);
        return diff::abs2({diff::row_sum(prod.re), diff::row_sum(prod.im)});
    }

    UtilityNodes utility_graph(const GfModel &m, std::span<const Var> leaves, const ChannelBatch &batch,
                               const LinkBudget &budget, const CMatrix *noise)
    {
        Tape &t = *leaves[0].tape();
        UtilityNodes u;
        u.probe = probe_graph(m, leaves, batch, budget, noise);
        u.synth = synth_graph(m, leaves, feature_graph(m, u.probe.z));

        const Var inv_energy = t.constant(batch.energy.cwiseInverse());
        u.u_bf = diff::mean(diff::mul(pair_gain_graph(batch, u.synth.v_t, u.synth.v_r), inv_energy));

        // Coverage set membership uses the deterministic probing SNR.
        const double noise_w = budget.noise_power_w();
        const double threshold = db_to_linear(m.config.snr_threshold_db);
        const Tensor &cg = u.probe.clean_gain.value();
        Tensor below = Tensor::Zero(batch.size(), 1);
        for (Eigen::Index b = 0; b < batch.size(); ++b)
        {
            const double best = cg.row(b).maxCoeff();
            const bool covered = noise_w <= 0.0 || budget.tx_power_w() * best / noise_w >= threshold;
            if (!covered)
            {
                below(b, 0) = 1.0;
                ++u.below_threshold;
            }
        }

        if (u.below_threshold == 0)
        {
            u.utility = u.u_bf;
            return u;
        }
        const Var best_norm = diff::row_max(diff::mul_col(u.probe.clean_gain, inv_energy));
        u.u_ia = diff::scale(diff::sum(diff::mul(best_norm, t.constant(below))), 1.0 / u.below_threshold);
        u.utility = diff::add(diff::scale(u.u_bf, m.config.gamma), diff::scale(*u.u_ia, 1.0 - m.config.gamma));
        return u;
    }

    Measurement probe_forward(const ProbingModel &m, const ChannelSample &h, const LinkBudget &budget,
                              std::optional<std::uint64_t> noise_seed)
    {
        const auto samples = single(h);
        const auto batch = ChannelBatch::from(samples);
        Tape t;
        const auto leaves = t.bind(m.params);
        CMatrix noise;
        if (m.config.include_measurement_noise)
            noise = draw_probe_noise(batch, m.config.n_probe, budget.noise_power_w(), noise_seed.value_or(m.config.seed));
        const auto p = probe_graph(m, leaves, batch, budget, m.config.include_measurement_noise ? &noise : nullptr);
        return {row_vector(p.z.value())};
    }

    RVector featurize(const ProbingModel &m, const Measurement &z)
    {
        if (z.z.size() != m.config.n_probe)
            throw ConfigError("featurize: measurement length does not match n_probe.");
        Tape t;
        const Var x = feature_graph(m, t.constant(z.z.transpose()));
        return row_vector(x.value());
    }

    Measurement mask_top_m(const Measurement &z, int m)
    {
        if (m < 1 || m > z.z.size())
            throw ConfigError("mask_top_m: m must lie in [1, len(z)].");
        const Tensor row = z.z.transpose();
        return {row.cwiseProduct(top_m_mask(row, m)).transpose()};
    }

    std::pair<CVector, CVector> synthesize(const GfModel &m, const Measurement &z)
    {
        if (z.z.size() != m.config.n_probe)
            throw ConfigError("synthesize: measurement length does not match n_probe.");
        Tape t;
        const auto leaves = t.bind(m.params);
        const Var x = feature_graph(m, t.constant(z.z.transpose()));
        const auto s = synth_graph(m, leaves, x);
        return {diff::cvalue(s.v_t).row(0).transpose(), diff::cvalue(s.v_r).row(0).transpose()};
    }

    UtilityValue utility(const GfModel &m, std::span<const ChannelSample *const> batch, const LinkBudget &budget,
                         std::uint64_t noise_seed)
    {
        const auto cb = ChannelBatch::from(batch);
        Tape t;
        const auto leaves = t.bind(m.params);
        CMatrix noise;
        if (m.config.include_measurement_noise)
            noise = draw_probe_noise(cb, m.config.n_probe, budget.noise_power_w(), noise_seed);
        const auto u = utility_graph(m, leaves, cb, budget, m.config.include_measurement_noise ? &noise : nullptr);
        UtilityValue v;
        v.utility = u.utility.item();
        v.u_bf = u.u_bf.item();
        v.u_ia = u.u_ia ? u.u_ia->item() : 0.0;
        v.below_threshold = u.below_threshold;
        return v;
    }

    std::pair<RVector, RVector> cb_forward(const CbModel &m, const Measurement &z)
    {
        if (z.z.size() != m.config.n_probe)
            throw ConfigError("cb_forward: measurement length does not match n_probe.");
        Tape t;
        const auto leaves = t.bind(m.params);
        const Var x = feature_graph(m, t.constant(z.z.transpose()));
        return {row_vector(mlp_graph(m, leaves, "class_t", x).value()),
                row_vector(mlp_graph(m, leaves, "class_r", x).value())};
    }

    Var cb_loss(const Var &logits_t, const Var &logits_r, std::span<const int> label_t, std::span<const int> label_r)
    {
        return diff::add(diff::cross_entropy(logits_t, label_t), diff::cross_entropy(logits_r, label_r));
    }

    void fit_feature_stats(ProbingModel &m, std::span<const ChannelSample *const> train, const LinkBudget &budget)
    {
        if (train.empty())
            throw ConfigError("fit_feature_stats: no training samples.");
        const auto k = static_cast<Eigen::Index>(m.config.n_probe);
        RVector sum = RVector::Zero(k), sum_sq = RVector::Zero(k);
        constexpr std::size_t chunk = 512;
        for (std::size_t start = 0; start < train.size(); start += chunk)
        {
            const auto part = train.subspan(start, std::min(chunk, train.size() - start));
            const auto batch = ChannelBatch::from(part);
            Tape t;
            const auto leaves = t.bind(m.params);
            const auto p = probe_graph(m, leaves, batch, budget, nullptr);
            const Tensor db = 10.0 * p.z.value().cwiseMax(kPowerFloor).array().log10();
            sum += db.colwise().sum().transpose();
            sum_sq += db.array().square().matrix().colwise().sum().transpose();
        }
        const double n = static_cast<double>(train.size());
        m.stats.mean = sum / n;
        m.stats.stddev = ((sum_sq / n).array() - m.stats.mean.array().square()).max(0.0).sqrt().max(1e-6).matrix();
    }
}
