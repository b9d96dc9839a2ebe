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

#include "gfbeam/evaluate.hpp"
#include "gfbeam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace gfbeam
{
    namespace
    {
        constexpr std::size_t kChunk = 512;

        struct MethodName
        {
            Method method;
            const char *name;
        };

        constexpr MethodName kMethodNames[] = {
            {Method::dl_gf, "dl_gf"},           {Method::dl_cb_top1, "dl_cb_top1"}, {Method::dl_cb_topk, "dl_cb_topk"},
            {Method::exhaustive, "exhaustive"}, {Method::genie, "genie"},           {Method::dft_egc, "dft_egc"},
            {Method::mrt_mrc, "mrt_mrc"},       {Method::hierarchical, "hierarchical"},
        };

        double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

        double safe_db(double linear) { return 10.0 * std::log10(linear); }

        BeamPair measured_argmax(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r,
                                 std::span<const int> tx_set, std::span<const int> rx_set, const LinkBudget &budget,
                                 std::uint64_t seed)
        {
            const double sqrt_pt = std::sqrt(budget.tx_power_w());
            const double noise_w = budget.noise_power_w();
            const auto m_r = static_cast<int>(cb_r.size());
            BeamPair best{tx_set[0], rx_set[0]};
            double best_power = -1.0;
            for (int t : tx_set)
            {
                const CVector hf = h * cb_t.beam(t);
                for (int r : rx_set)
                {
                    const cplx y = sqrt_pt * cb_r.beam(r).dot(hf) + pair_noise(seed, t, r, m_r, noise_w);
                    const double p = std::norm(y);
                    if (p > best_power)
                    {
                        best_power = p;
                        best = {t, r};
                    }
                }
            }
            return best;
        }

        BeamPair select_from_logits(const RVector &logits_t, const RVector &logits_r, int k, const CMatrix &h,
                                    const Codebook &cb_t, const Codebook &cb_r, const LinkBudget &budget,
                                    std::uint64_t seed)
        {
            if (k < 1)
                throw ConfigError("cb_topk_select: k must be at least 1.");
            auto tx = top_k_indices(logits_t, k);
            auto rx = top_k_indices(logits_r, k);
            if (k == 1)
                return {tx[0], rx[0]};
            // sweep in ascending index order, same order as the exhaustive search
            std::sort(tx.begin(), tx.end());
            std::sort(rx.begin(), rx.end());
            return measured_argmax(h, cb_t, cb_r, tx, rx, budget, seed);
        }

        std::vector<std::vector<const ChannelSample *>> chunks(std::span<const ChannelSample *const> samples)
        {
            std::vector<std::vector<const ChannelSample *>> out;
            for (std::size_t s = 0; s < samples.size(); s += kChunk)
                out.emplace_back(samples.begin() + static_cast<std::ptrdiff_t>(s),
                                 samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), s + kChunk)));
            return out;
        }

        std::uint64_t sample_seed(std::uint64_t seed, Method m, std::int64_t id)
        {
            return derive_seed(seed, {0x6576616cULL, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(id)});
        }
    }

    const char *method_name(Method m)
    {
        for (const auto &e : kMethodNames)
            if (e.method == m)
                return e.name;
        return "?";
    }

    Method parse_method(std::string_view name)
    {
        for (const auto &e : kMethodNames)
            if (name == e.name)
                return e.method;
        throw ConfigError("Unknown method '" + std::string(name) + "'.");
    }

    void OverheadParams::validate() const
    {
        if (k_ues < 1 || n_probe < 1 || m_t < 1 || m_r < 1 || n_f_wide < 1 || n_w_wide < 1 || cb_topk_per_dim < 1)
            throw ConfigError("Overhead parameters must all be positive.");
    }

    RMatrix codebook_gains(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r)
    {
        if (h.cols() != cb_t.beams.rows() || h.rows() != cb_r.beams.rows())
            throw ConfigError("Codebook dimensions do not match the channel.");
        return (cb_r.beams.adjoint() * h * cb_t.beams).cwiseAbs2();
    }

    BeamPair genie_select(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r)
    {
        const RMatrix g = codebook_gains(h, cb_t, cb_r);
        BeamPair best;
        double best_gain = -1.0;
        for (Eigen::Index t = 0; t < g.cols(); ++t)
            for (Eigen::Index r = 0; r < g.rows(); ++r)
                if (g(r, t) > best_gain)
                {
                    best_gain = g(r, t);
                    best = {static_cast<int>(t), static_cast<int>(r)};
                }
        return best;
    }

    cplx pair_noise(std::uint64_t seed, int tx, int rx, int m_r, double noise_power)
    {
        if (noise_power <= 0.0)
            return {0.0, 0.0};
        const auto idx = static_cast<std::uint64_t>(tx) * static_cast<std::uint64_t>(m_r) + static_cast<std::uint64_t>(rx);
        const std::uint64_t base = mix_seed(seed ^ mix_seed(idx));
        double u1 = to_unit(mix_seed(base + 1));
        if (u1 <= 0.0)
            u1 = 0x1.0p-53;
        const double u2 = to_unit(mix_seed(base + 2));
        const double rad = std::sqrt(-std::log(u1) * noise_power); // sqrt(-2 ln u1) * sqrt(sigma^2 / 2)
        return std::polar(rad, 2.0 * kPi * u2);
    }

    BeamPair exhaustive_search(const CMatrix &h, const Codebook &cb_t, const Codebook &cb_r, const LinkBudget &budget,
                               std::uint64_t seed)
    {
        if (budget.noise_power_w() <= 0.0)
            return genie_select(h, cb_t, cb_r);
        std::vector<int> tx(static_cast<std::size_t>(cb_t.size())), rx(static_cast<std::size_t>(cb_r.size()));
        std::iota(tx.begin(), tx.end(), 0);
        std::iota(rx.begin(), rx.end(), 0);
        return measured_argmax(h, cb_t, cb_r, tx, rx, budget, seed);
    }

    EgcSelection dft_egc_select(const CMatrix &h, const Codebook &cb_t)
    {
        if (h.cols() != cb_t.beams.rows())
            throw ConfigError("dft_egc_select: codebook does not match the channel.");
        const CMatrix hf = h * cb_t.beams;
        const double n_r = static_cast<double>(h.rows());
        EgcSelection best;
        best.gain = -1.0;
        for (Eigen::Index t = 0; t < hf.cols(); ++t)
        {
            const double s = hf.col(t).cwiseAbs().sum();
            const double gain = s * s / n_r;
            if (gain > best.gain)
            {
                best.gain = gain;
                best.tx = static_cast<int>(t);
            }
        }
        best.w = egc_combiner(h, cb_t.beam(best.tx));
        return best;
    }

    std::vector<int> top_k_indices(const RVector &scores, int k)
    {
        if (k < 1 || k > scores.size())
            k = static_cast<int>(std::clamp<Eigen::Index>(k, 1, scores.size()));
        std::vector<int> idx(static_cast<std::size_t>(scores.size()));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores(a) > scores(b); });
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    }

    BeamPair cb_topk_select(const CbModel &cb, const CMatrix &h, const Measurement &z, int k, const Codebook &cb_t,
                            const Codebook &cb_r, const LinkBudget &budget, std::uint64_t seed)
    {
        const auto [lt, lr] = cb_forward(cb, z);
        return select_from_logits(lt, lr, k, h, cb_t, cb_r, budget, seed);
    }

    double misdetection_probability(const ProbingModel &m, std::span<const ChannelSample *const> samples,
                                    const LinkBudget &budget, double snr_threshold_db)
    {
        if (samples.empty())
            throw ConfigError("misdetection_probability: empty split.");
        const double threshold = db_to_linear(snr_threshold_db);
        const double pt = budget.tx_power_w(), noise_w = budget.noise_power_w();
        std::size_t missed = 0;
        for (const auto &part : chunks(samples))
        {
            const auto batch = ChannelBatch::from(part);
            diff::Tape t;
            const auto leaves = t.bind(m.params);
            const auto p = probe_graph(m, leaves, batch, budget, nullptr);
            for (Eigen::Index b = 0; b < batch.size(); ++b)
            {
                const double best = p.clean_gain.value().row(b).maxCoeff();
                if (noise_w > 0.0 && pt * best / noise_w < threshold)
                    ++missed;
            }
        }
        return static_cast<double>(missed) / static_cast<double>(samples.size());
    }

    SnrSummary snr_percentiles(std::span<const double> snr_db, bool linear_mean)
    {
        if (snr_db.empty())
            throw ConfigError("snr_percentiles: no records.");
        std::vector<double> v(snr_db.begin(), snr_db.end());
        std::sort(v.begin(), v.end());
        auto pct = [&](double p) {
            const double pos = p * static_cast<double>(v.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, v.size() - 1);
            const double frac = pos - static_cast<double>(lo);
            return v[lo] + (v[hi] - v[lo]) * frac;
        };
        SnrSummary s;
        s.p10 = pct(0.10);
        s.p50 = pct(0.50);
        s.p90 = pct(0.90);
        if (linear_mean)
        {
            double acc = 0.0;
            for (double x : snr_db)
                acc += db_to_linear(x);
            s.mean = linear_to_db(acc / static_cast<double>(snr_db.size()));
        }
        else
            s.mean = std::accumulate(snr_db.begin(), snr_db.end(), 0.0) / static_cast<double>(snr_db.size());
        return s;
    }

    SnrSummary snr_percentiles(std::span<const EvalRecord> records, bool linear_mean)
    {
        std::vector<double> v;
        v.reserve(records.size());
        for (const auto &r : records)
            v.push_back(r.snr_db);
        return snr_percentiles(v, linear_mean);
    }

    std::int64_t sweeping_overhead(Method method, const OverheadParams &p)
    {
        p.validate();
        const std::int64_t k_ues = p.k_ues, m_t = p.m_t, m_r = p.m_r;
        auto ceil_div = [](std::int64_t a, std::int64_t b) { return (a + b - 1) / b; };
        switch (method)
        {
        case Method::dl_gf:
        case Method::dl_cb_top1:
            return p.n_probe;
        case Method::dl_cb_topk:
        {
            const std::int64_t k = p.cb_topk_per_dim;
            return k > 1 ? p.n_probe + std::min(k_ues * k * k, m_t * m_r) : p.n_probe;
        }
        case Method::hierarchical:
            return p.n_f_wide + std::min(ceil_div(k_ues * m_t, p.n_f_wide), m_t) + p.n_w_wide +
                   std::min(ceil_div(k_ues * m_r, p.n_w_wide), m_r);
        case Method::exhaustive:
            return m_t * m_r;
        default:
            throw ConfigError(std::string("No beam sweeping overhead is defined for method ") + method_name(method) + ".");
        }
    }

    GfPrediction predict_gf(const GfModel &m, std::span<const ChannelSample *const> samples, const LinkBudget &budget,
                            std::uint64_t seed, bool measurement_noise)
    {
        GfPrediction out;
        const auto n = static_cast<Eigen::Index>(samples.size());
        out.v_t.resize(n, m.n_t);
        out.v_r.resize(n, m.n_r);
        out.z.resize(n, m.config.n_probe);
        const double pt = budget.tx_power_w(), noise_w = budget.noise_power_w();
        Eigen::Index row = 0;
        for (const auto &part : chunks(samples))
        {
            const auto batch = ChannelBatch::from(part);
            diff::Tape t;
            const auto leaves = t.bind(m.params);
            CMatrix noise;
            if (measurement_noise)
                noise = draw_probe_noise(batch, m.config.n_probe, noise_w, seed);
            const auto p = probe_graph(m, leaves, batch, budget, measurement_noise ? &noise : nullptr);
            const auto s = synth_graph(m, leaves, feature_graph(m, p.z));
            const CMatrix vt = diff::cvalue(s.v_t), vr = diff::cvalue(s.v_r);
            for (Eigen::Index b = 0; b < batch.size(); ++b, ++row)
            {
                const CMatrix &h = part[static_cast<std::size_t>(b)]->h;
                out.v_t.row(row) = vt.row(b);
                out.v_r.row(row) = vr.row(b);
                out.z.row(row) = p.z.value().row(b);
                const double gain = bf_gain(h, vt.row(b).transpose(), vr.row(b).transpose());
                out.snr_db.push_back(safe_db(pt * gain / noise_w));
                out.norm_gain.push_back(gain / batch.energy(b));
                out.best_probe_snr_db.push_back(safe_db(pt * p.clean_gain.value().row(b).maxCoeff() / noise_w));
            }
        }
        return out;
    }

    CbPrediction predict_cb(const CbModel &m, std::span<const ChannelSample *const> samples, const LinkBudget &budget,
                            std::uint64_t seed, bool measurement_noise)
    {
        CbPrediction out;
        const auto n = static_cast<Eigen::Index>(samples.size());
        out.logits_t.resize(n, m.m_t);
        out.logits_r.resize(n, m.m_r);
        out.z.resize(n, m.config.n_probe);
        const double pt = budget.tx_power_w(), noise_w = budget.noise_power_w();
        Eigen::Index row = 0;
        for (const auto &part : chunks(samples))
        {
            const auto batch = ChannelBatch::from(part);
            diff::Tape t;
            const auto leaves = t.bind(m.params);
            CMatrix noise;
            if (measurement_noise)
                noise = draw_probe_noise(batch, m.config.n_probe, noise_w, seed);
            const auto p = probe_graph(m, leaves, batch, budget, measurement_noise ? &noise : nullptr);
            const auto x = feature_graph(m, p.z);
            const auto lt = mlp_graph(m, leaves, "class_t", x);
            const auto lr = mlp_graph(m, leaves, "class_r", x);
            out.logits_t.middleRows(row, batch.size()) = lt.value();
            out.logits_r.middleRows(row, batch.size()) = lr.value();
            out.z.middleRows(row, batch.size()) = p.z.value();
            for (Eigen::Index b = 0; b < batch.size(); ++b)
                out.best_probe_snr_db.push_back(safe_db(pt * p.clean_gain.value().row(b).maxCoeff() / noise_w));
            row += batch.size();
        }
        return out;
    }

    std::vector<EvalRecord> evaluate_all(const EvalSetup &setup, std::span<const ChannelSample *const> samples)
    {
        if (samples.empty())
            throw ConfigError("evaluate_all: no samples.");
        const auto &budget = setup.budget;
        const double pt = budget.tx_power_w(), noise_w = budget.noise_power_w();
        const int n_t = static_cast<int>(samples[0]->h.cols()), n_r = static_cast<int>(samples[0]->h.rows());
        auto need_codebooks = [&] {
            if (!setup.cb_t || !setup.cb_r)
                throw ConfigError("evaluate_all: codebooks are required for the requested methods.");
            if (setup.cb_t->beams.rows() != n_t || setup.cb_r->beams.rows() != n_r)
                throw ConfigError("evaluate_all: codebook shapes are incompatible with the channels.");
        };

        auto record = [&](std::int64_t id, Method m, double gain, double energy) {
            EvalRecord r;
            r.sample_id = id;
            r.method = m;
            r.snr_db = safe_db(pt * gain / noise_w);
            r.normalized_gain = gain / energy;
            return r;
        };

        std::vector<EvalRecord> out;
        out.reserve(samples.size() * setup.methods.size());
        for (Method method : setup.methods)
        {
            switch (method)
            {
            case Method::mrt_mrc:
                for (const auto *s : samples)
                    out.push_back(record(s->id, method, mrt_mrc(s->h).gain,
                                         s->h.squaredNorm()));
                break;
            case Method::dft_egc:
                need_codebooks();
                for (const auto *s : samples)
                    out.push_back(record(s->id, method, dft_egc_select(s->h, *setup.cb_t).gain, s->h.squaredNorm()));
                break;
            case Method::genie:
                need_codebooks();
                for (const auto *s : samples)
                {
                    const auto p = genie_select(s->h, *setup.cb_t, *setup.cb_r);
                    out.push_back(record(s->id, method, bf_gain(s->h, setup.cb_t->beam(p.tx), setup.cb_r->beam(p.rx)),
                                         s->h.squaredNorm()));
                }
                break;
            case Method::exhaustive:
                need_codebooks();
                for (const auto *s : samples)
                {
                    const auto p = exhaustive_search(s->h, *setup.cb_t, *setup.cb_r, budget,
                                                     sample_seed(setup.seed, method, s->id));
                    out.push_back(record(s->id, method, bf_gain(s->h, setup.cb_t->beam(p.tx), setup.cb_r->beam(p.rx)),
                                         s->h.squaredNorm()));
                }
                break;
            case Method::dl_gf:
            {
                if (!setup.gf)
                    throw ConfigError("evaluate_all: dl_gf requested without a DL-GF model.");
                if (setup.gf->n_t != n_t || setup.gf->n_r != n_r)
                    throw ConfigError("evaluate_all: DL-GF model shape is incompatible with the channels.");
                const auto pred = predict_gf(*setup.gf, samples, budget, setup.seed, setup.measurement_noise);
                for (std::size_t i = 0; i < samples.size(); ++i)
                {
                    EvalRecord r;
                    r.sample_id = samples[i]->id;
                    r.method = method;
                    r.snr_db = pred.snr_db[i];
                    r.normalized_gain = pred.norm_gain[i];
                    r.best_probe_snr_db = pred.best_probe_snr_db[i];
                    out.push_back(r);
                }
                break;
            }
            case Method::dl_cb_top1:
            case Method::dl_cb_topk:
            {
                need_codebooks();
                if (!setup.cb)
                    throw ConfigError("evaluate_all: DL-CB requested without a DL-CB model.");
                if (setup.cb->n_t != n_t || setup.cb->n_r != n_r || setup.cb->m_t != setup.cb_t->size() ||
                    setup.cb->m_r != setup.cb_r->size())
                    throw ConfigError("evaluate_all: DL-CB model shape is incompatible with the channels/codebooks.");
                const auto pred = predict_cb(*setup.cb, samples, budget, setup.seed, setup.measurement_noise);
                const int k = method == Method::dl_cb_top1 ? 1 : setup.cb_topk;
                for (std::size_t i = 0; i < samples.size(); ++i)
                {
                    const auto *s = samples[i];
                    const auto ii = static_cast<Eigen::Index>(i);
                    const auto p = select_from_logits(pred.logits_t.row(ii).transpose(), pred.logits_r.row(ii).transpose(),
                                                      k, s->h, *setup.cb_t, *setup.cb_r, budget,
                                                      sample_seed(setup.seed, method, s->id));
                    auto r = record(s->id, method, bf_gain(s->h, setup.cb_t->beam(p.tx), setup.cb_r->beam(p.rx)),
                                    s->h.squaredNorm());
                    r.best_probe_snr_db = pred.best_probe_snr_db[i];
                    out.push_back(r);
                }
                break;
            }
            case Method::hierarchical:
                throw ConfigError("evaluate_all: the hierarchical search is accounted for in overhead only.");
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const EvalRecord &a, const EvalRecord &b) {
            if (a.method != b.method)
                return static_cast<int>(a.method) < static_cast<int>(b.method);
            return a.sample_id < b.sample_id;
        });
        return out;
    }

    std::vector<SummaryRow> summarize(std::span<const EvalRecord> records, const RunContext &ctx,
                                      const OverheadParams &overhead, std::optional<double> misdetection_gf,
                                      std::optional<double> misdetection_cb, bool linear_mean)
    {
        std::map<int, std::vector<double>> by_method;
        for (const auto &r : records)
            by_method[static_cast<int>(r.method)].push_back(r.snr_db);
        std::vector<SummaryRow> rows;
        for (const auto &[mi, snrs] : by_method)
        {
            SummaryRow row;
            row.method = static_cast<Method>(mi);
            row.context = ctx;
            row.k_ues = overhead.k_ues;
            row.snr = snr_percentiles(snrs, linear_mean);
            row.samples = snrs.size();
            if (row.method == Method::dl_gf)
                row.misdetection = misdetection_gf;
            if (row.method == Method::dl_cb_top1 || row.method == Method::dl_cb_topk)
                row.misdetection = misdetection_cb;
            switch (row.method)
            {
            case Method::dl_gf:
            case Method::dl_cb_top1:
            case Method::dl_cb_topk:
            case Method::exhaustive:
            {
                OverheadParams p = overhead;
                p.n_probe = ctx.n_probe > 0 ? ctx.n_probe : overhead.n_probe;
                row.overhead = sweeping_overhead(row.method, p);
                row.speed = 1.0 / static_cast<double>(row.overhead);
                break;
            }
            default:
                break;
            }
            rows.push_back(row);
        }
        return rows;
    }

    std::vector<SpeedRow> snr_vs_speed(std::span<const SummaryRow> rows, std::span<const int> k_values,
                                       const OverheadParams &p)
    {
        std::vector<SpeedRow> out;
        for (const auto &row : rows)
        {
            if (row.method != Method::dl_gf && row.method != Method::dl_cb_top1 && row.method != Method::dl_cb_topk &&
                row.method != Method::exhaustive)
                continue;
            for (int k : k_values)
            {
                OverheadParams q = p;
                q.k_ues = k;
                if (row.context.n_probe > 0)
                    q.n_probe = row.context.n_probe;
                SpeedRow s;
                s.method = row.method;
                s.n_probe = q.n_probe;
                s.k_ues = k;
                s.overhead = sweeping_overhead(row.method, q);
                s.speed = 1.0 / static_cast<double>(s.overhead);
                s.avg_snr_db = row.snr.mean;
                out.push_back(s);
            }
        }
        if (out.empty())
            throw ConfigError("snr_vs_speed: no method with a defined sweeping overhead.");
        return out;
    }

    std::string format_double(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }

    namespace
    {
        std::ofstream open_csv(const std::filesystem::path &path)
        {
            std::ofstream out(path);
            if (!out)
                throw ConfigError("Cannot open '" + path.string() + "' for writing.");
            return out;
        }

        std::string context_fields(const RunContext &c)
        {
            return std::to_string(c.n_probe) + "," + format_double(c.gamma) + "," + format_double(c.noise_psd_dbm_hz) +
                   "," + format_double(c.train_nmse_db) + "," + std::to_string(c.feedback_m) + "," +
                   (c.rotation_enabled ? "1" : "0");
        }
    }

    void write_records_csv(const std::filesystem::path &path, std::span<const EvalRecord> records,
                           const RunContext &ctx)
    {
        auto out = open_csv(path);
        out << "method,n_probe,gamma,noise_psd_dbm_hz,train_nmse_db,feedback_m,rotation_enabled,sample_id,snr_db,"
               "normalized_gain,best_probe_snr_db\n";
        const std::string c = context_fields(ctx);
        for (const auto &r : records)
            out << method_name(r.method) << ',' << c << ',' << r.sample_id << ',' << format_double(r.snr_db) << ','
                << format_double(r.normalized_gain) << ','
                << (r.best_probe_snr_db ? format_double(*r.best_probe_snr_db) : std::string()) << '\n';
    }

    void write_summary_csv(const std::filesystem::path &path, std::span<const SummaryRow> rows)
    {
        auto out = open_csv(path);
        out << "method,n_probe,gamma,noise_psd_dbm_hz,train_nmse_db,feedback_m,rotation_enabled,k_ues,samples,p10_db,"
               "p50_db,p90_db,mean_db,misdetection,overhead,speed\n";
        for (const auto &r : rows)
            out << method_name(r.method) << ',' << context_fields(r.context) << ',' << r.k_ues << ',' << r.samples
                << ',' << format_double(r.snr.p10) << ',' << format_double(r.snr.p50) << ','
                << format_double(r.snr.p90) << ',' << format_double(r.snr.mean) << ','
                << (r.misdetection ? format_double(*r.misdetection) : std::string()) << ','
                << (r.overhead > 0 ? std::to_string(r.overhead) : std::string()) << ','
                << (r.overhead > 0 ? format_double(r.speed) : std::string()) << '\n';
    }

    void write_speed_csv(const std::filesystem::path &path, std::span<const SpeedRow> rows)
    {
        auto out = open_csv(path);
        out << "method,n_probe,k_ues,overhead,speed,avg_snr_db\n";
        for (const auto &r : rows)
            out << method_name(r.method) << ',' << r.n_probe << ',' << r.k_ues << ',' << r.overhead << ','
                << format_double(r.speed) << ',' << format_double(r.avg_snr_db) << '\n';
    }
}
