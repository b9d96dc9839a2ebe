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

#include "gfbeam/train.hpp"
#include "gfbeam/evaluate.hpp"
#include "gfbeam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gfbeam
{
    using diff::Tape;
    using diff::Var;

    void adam_step(AdamState &state, diff::ParamBlock &params, const diff::Gradients &grads)
    {
        if (grads.size() != params.size())
            throw ConfigError("adam_step: gradient count does not match the parameters.");
        if (state.m.empty())
        {
            for (std::size_t i = 0; i < params.size(); ++i)
            {
                state.m.push_back(diff::Tensor::Zero(params.at(i).rows(), params.at(i).cols()));
                state.v.push_back(diff::Tensor::Zero(params.at(i).rows(), params.at(i).cols()));
            }
        }
        ++state.step;
        const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < params.size(); ++i)
        {
            auto &m = state.m[i];
            auto &v = state.v[i];
            const auto &g = grads[i];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
            params.at(i).array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
        }
    }

    void TrainConfig::validate() const
    {
        if (epochs < 1)
            throw ConfigError("epochs must be at least 1.");
        if (batch_size < 1)
            throw ConfigError("batch_size must be at least 1.");
        if (!(lr > 0.0) || !std::isfinite(lr))
            throw ConfigError("lr must be positive.");
        if (log_every < 0)
            throw ConfigError("log_every must be non-negative.");
    }

    std::uint64_t validation_noise_seed(const TrainConfig &cfg) { return derive_seed(cfg.seed, {0x76616cULL}); }

    namespace
    {
        struct Splits
        {
            std::vector<std::size_t> train_idx;
            std::vector<const ChannelSample *> train, val;
        };

        Splits prepare(const Dataset &ds, const LinkBudget &budget, const TrainConfig &tr_cfg)
        {
            tr_cfg.validate();
            budget.validate();
            Splits s;
            s.train_idx = ds.indices(Split::train);
            if (s.train_idx.empty())
                throw ConfigError("Training requires a non-empty train split.");
            for (auto i : s.train_idx)
                s.train.push_back(&ds.samples[i]);
            s.val = ds.subset(Split::val);
            if (s.val.empty())
                s.val = s.train;
            return s;
        }

        std::vector<std::size_t> epoch_order(std::size_t n, const TrainConfig &cfg, int epoch)
        {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            if (cfg.shuffle)
            {
                Rng rng = make_rng(cfg.seed, {0x73687566ULL, static_cast<std::uint64_t>(epoch)});
                for (std::size_t i = n; i > 1; --i)
                {
                    const auto j = static_cast<std::size_t>(uniform(rng, 0.0, 1.0) * static_cast<double>(i));
                    std::swap(order[i - 1], order[std::min(j, i - 1)]);
                }
            }
            return order;
        }

        void check_finite(const ProbingModel &m, int epoch)
        {
            if (!m.params.all_finite())
                throw NumericalError("Non-finite parameters after epoch " + std::to_string(epoch) + ".");
        }

        double mean(const std::vector<double> &v)
        {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        }

        template <class F>
        double run_batches(const Splits &s, const TrainConfig &cfg, int epoch, F &&step)
        {
            const auto order = epoch_order(s.train.size(), cfg, epoch);
            const auto bs = static_cast<std::size_t>(cfg.batch_size);
            double acc = 0.0;
            std::size_t batches = 0;
            std::vector<std::size_t> pos;
            for (std::size_t start = 0; start < order.size(); start += bs, ++batches)
            {
                pos.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
                acc += step(pos, derive_seed(cfg.seed, {0x6e6f6973ULL, static_cast<std::uint64_t>(epoch),
                                                        static_cast<std::uint64_t>(batches)}));
            }
            return acc / static_cast<double>(batches);
        }
    }

    TrainResult<GfModel> train_gf(const Dataset &ds, const LinkBudget &budget, const GfConfig &gf_cfg,
                                  const TrainConfig &tr_cfg, const ProgressFn &progress)
    {
        const auto s = prepare(ds, budget, tr_cfg);
        TrainResult<GfModel> result{GfModel::init(gf_cfg, ds.n_t(), ds.n_r()), {}, 0};
        GfModel &m = result.model;
        if (gf_cfg.feature_scale == FeatureScale::log_standardized)
            fit_feature_stats(m, s.train, budget);
        const bool noisy = gf_cfg.include_measurement_noise;
        const double noise_w = budget.noise_power_w();
        const std::uint64_t val_seed = validation_noise_seed(tr_cfg);

        AdamState adam;
        adam.lr = tr_cfg.lr;
        GfModel best = m;
        double best_snr = -INFINITY;
        std::vector<const ChannelSample *> batch_samples;
        for (int epoch = 1; epoch <= tr_cfg.epochs; ++epoch)
        {
            const double train_u = run_batches(s, tr_cfg, epoch, [&](const std::vector<std::size_t> &pos, std::uint64_t seed) {
                batch_samples.clear();
                for (auto p : pos)
                    batch_samples.push_back(s.train[p]);
                const auto batch = ChannelBatch::from(batch_samples);
                Tape t;
                const auto leaves = t.bind(m.params);
                CMatrix noise;
                if (noisy)
                    noise = draw_probe_noise(batch, gf_cfg.n_probe, noise_w, seed);
                const auto u = utility_graph(m, leaves, batch, budget, noisy ? &noise : nullptr);
                const double value = u.utility.item();
                if (!std::isfinite(value))
                    throw NumericalError("Non-finite training utility at epoch " + std::to_string(epoch) + ".");
                t.backward(diff::neg(u.utility));
                adam_step(adam, m.params, t.gradients(leaves));
                return value;
            });
            check_finite(m, epoch);

            const auto pred = predict_gf(m, s.val, budget, val_seed, noisy);
            HistoryRow row;
            row.epoch = epoch;
            row.train_utility = train_u;
            row.val_ubf = mean(pred.norm_gain);
            row.val_avg_snr_db = mean(pred.snr_db);
            row.val_misdetection = misdetection_probability(m, s.val, budget, gf_cfg.snr_threshold_db);
            if (!std::isfinite(row.val_avg_snr_db) && !std::isinf(row.val_avg_snr_db))
                throw NumericalError("Non-finite validation SNR at epoch " + std::to_string(epoch) + ".");
            result.history.push_back(row);
            if (row.val_avg_snr_db > best_snr || result.best_epoch == 0)
            {
                best_snr = row.val_avg_snr_db;
                best = m;
                result.best_epoch = epoch;
            }
            if (progress && tr_cfg.log_every > 0 && (epoch % tr_cfg.log_every == 0 || epoch == tr_cfg.epochs))
                progress(row);
        }
        result.model = std::move(best);
        return result;
    }

    Labels label_dataset(const Dataset &ds, const Codebook &cb_t, const Codebook &cb_r)
    {
        Labels l;
        l.tx.reserve(ds.size());
        l.rx.reserve(ds.size());
        for (const auto &s : ds.samples)
        {
            const auto p = genie_select(s.h, cb_t, cb_r);
            l.tx.push_back(p.tx);
            l.rx.push_back(p.rx);
        }
        return l;
    }

    TrainResult<CbModel> train_cb(const Dataset &ds, const LinkBudget &budget, const GfConfig &cb_cfg,
                                  const TrainConfig &tr_cfg, const Codebook &cb_t, const Codebook &cb_r,
                                  const Labels &labels, const ProgressFn &progress)
    {
        const auto s = prepare(ds, budget, tr_cfg);
        if (labels.tx.size() != ds.size() || labels.rx.size() != ds.size())
            throw ConfigError("train_cb: one label pair per dataset sample is required.");
        if (cb_t.beams.rows() != ds.n_t() || cb_r.beams.rows() != ds.n_r())
            throw ConfigError("train_cb: codebooks do not match the channel dimensions.");
        TrainResult<CbModel> result{
            CbModel::init(cb_cfg, ds.n_t(), ds.n_r(), static_cast<int>(cb_t.size()), static_cast<int>(cb_r.size())), {}, 0};
        CbModel &m = result.model;
        if (cb_cfg.feature_scale == FeatureScale::log_standardized)
            fit_feature_stats(m, s.train, budget);
        const bool noisy = cb_cfg.include_measurement_noise;
        const double noise_w = budget.noise_power_w(), pt = budget.tx_power_w();
        const std::uint64_t val_seed = validation_noise_seed(tr_cfg);

        AdamState adam;
        adam.lr = tr_cfg.lr;
        CbModel best = m;
        double best_snr = -INFINITY;
        std::vector<const ChannelSample *> batch_samples;
        std::vector<int> lt, lr;
        for (int epoch = 1; epoch <= tr_cfg.epochs; ++epoch)
        {
            const double train_u = run_batches(s, tr_cfg, epoch, [&](const std::vector<std::size_t> &pos, std::uint64_t seed) {
                batch_samples.clear();
                lt.clear();
                lr.clear();
                for (auto p : pos)
                {
                    batch_samples.push_back(s.train[p]);
                    lt.push_back(labels.tx[s.train_idx[p]]);
                    lr.push_back(labels.rx[s.train_idx[p]]);
                }
                const auto batch = ChannelBatch::from(batch_samples);
                Tape t;
                const auto leaves = t.bind(m.params);
                CMatrix noise;
                if (noisy)
                    noise = draw_probe_noise(batch, cb_cfg.n_probe, noise_w, seed);
                const auto p = probe_graph(m, leaves, batch, budget, noisy ? &noise : nullptr);
                const auto x = feature_graph(m, p.z);
                const auto loss = cb_loss(mlp_graph(m, leaves, "class_t", x), mlp_graph(m, leaves, "class_r", x), lt, lr);
                const double value = loss.item();
                if (!std::isfinite(value))
                    throw NumericalError("Non-finite training loss at epoch " + std::to_string(epoch) + ".");
                t.backward(loss);
                adam_step(adam, m.params, t.gradients(leaves));
                return -value;
            });
            check_finite(m, epoch);

            const auto pred = predict_cb(m, s.val, budget, val_seed, noisy);
            std::vector<double> snr, ng;
            for (std::size_t i = 0; i < s.val.size(); ++i)
            {
                const auto ii = static_cast<Eigen::Index>(i);
                Eigen::Index it = 0, ir = 0;
                pred.logits_t.row(ii).maxCoeff(&it);
                pred.logits_r.row(ii).maxCoeff(&ir);
                const auto &h = s.val[i]->h;
                const double g = bf_gain(h, cb_t.beam(static_cast<int>(it)), cb_r.beam(static_cast<int>(ir)));
                snr.push_back(10.0 * std::log10(pt * g / noise_w));
                ng.push_back(g / h.squaredNorm());
            }
            HistoryRow row;
            row.epoch = epoch;
            row.train_utility = train_u;
            row.val_ubf = mean(ng);
            row.val_avg_snr_db = mean(snr);
            row.val_misdetection = misdetection_probability(m, s.val, budget, cb_cfg.snr_threshold_db);
            result.history.push_back(row);
            if (row.val_avg_snr_db > best_snr || result.best_epoch == 0)
            {
                best_snr = row.val_avg_snr_db;
                best = m;
                result.best_epoch = epoch;
            }
            if (progress && tr_cfg.log_every > 0 && (epoch % tr_cfg.log_every == 0 || epoch == tr_cfg.epochs))
                progress(row);
        }
        result.model = std::move(best);
        return result;
    }

    void write_history_csv(const std::filesystem::path &path, std::span<const HistoryRow> history)
    {
        std::ofstream out(path);
        if (!out)
            throw ConfigError("Cannot open '" + path.string() + "' for writing.");
        out << "epoch,train_utility,val_ubf,val_avg_snr_db,val_misdetection\n";
        for (const auto &r : history)
            out << r.epoch << ',' << format_double(r.train_utility) << ',' << format_double(r.val_ubf) << ','
                << format_double(r.val_avg_snr_db) << ',' << format_double(r.val_misdetection) << '\n';
    }
}
