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

#include "gfbeam/pipeline.hpp"
#include "gfbeam/rng.hpp"

#include <algorithm>
#include <charconv>

namespace gfbeam
{
    namespace
    {
        constexpr std::uint64_t kSplitTag = 0x73706c74ULL;
        constexpr std::uint64_t kNmseTag = 0x6e6d7365ULL;

        bool has_method(const ExperimentConfig &cfg, std::initializer_list<Method> ms)
        {
            for (Method m : cfg.eval.methods)
                if (std::find(ms.begin(), ms.end(), m) != ms.end())
                    return true;
            return false;
        }

        double parse_real(const std::string &s, SweepAxis axis)
        {
            if (s == "-inf" || s == "none")
                return -INFINITY;
            try
            {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used == s.size())
                    return v;
            }
            catch (const std::exception &)
            {
            }
            throw ConfigError("Grid value '" + s + "' is not a number (axis " + axis_name(axis) + ").");
        }

        int parse_int(const std::string &s, SweepAxis axis)
        {
            int v = 0;
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw ConfigError("Grid value '" + s + "' is not an integer (axis " + axis_name(axis) + ").");
            return v;
        }
    }

    void apply_root_seed(ExperimentConfig &cfg, std::uint64_t root)
    {
        cfg.seed = root;
        cfg.scenario.seed = derive_seed(root, {1});
        cfg.gf.seed = derive_seed(root, {2});
        cfg.cb.seed = derive_seed(root, {3});
        cfg.train.seed = derive_seed(root, {4});
        cfg.eval.seed = derive_seed(root, {5});
    }

    Dataset generate_dataset(const ExperimentConfig &cfg)
    {
        cfg.dataset.validate();
        Dataset ds = generate_scenario(cfg.scenario, cfg.dataset.num_samples, cfg.scenario.seed);
        ds.scenario_json = to_json(cfg.scenario).dump();
        return split_dataset(std::move(ds), cfg.dataset.split, derive_seed(cfg.scenario.seed, {kSplitTag}));
    }

    std::pair<Codebook, Codebook> make_codebooks(const ExperimentConfig &cfg, const Dataset *ds)
    {
        auto cb_t = dft_codebook(cfg.scenario.tx_array, cfg.codebook.tx_q_y, cfg.codebook.tx_q_z);
        auto cb_r = dft_codebook(cfg.scenario.rx_array, cfg.codebook.rx_q_y, cfg.codebook.rx_q_z);
        if (ds && ds->size() > 0 && (ds->n_t() != cb_t.beams.rows() || ds->n_r() != cb_r.beams.rows()))
            throw ConfigError("Dataset is " + std::to_string(ds->n_r()) + "x" + std::to_string(ds->n_t()) +
                              " but the config arrays give " + std::to_string(cb_r.beams.rows()) + "x" +
                              std::to_string(cb_t.beams.rows()) + ".");
        return {std::move(cb_t), std::move(cb_r)};
    }

    Dataset training_view(const Dataset &ds, const ExperimentConfig &cfg)
    {
        if (std::isinf(cfg.dataset.train_nmse_db) && cfg.dataset.train_nmse_db < 0)
            return ds;
        return corrupt_dataset(ds, cfg.dataset.train_nmse_db, derive_seed(cfg.seed, {kNmseTag}));
    }

    bool dataset_rotation_enabled(const Dataset &ds, const ExperimentConfig &cfg)
    {
        try
        {
            const auto j = nlohmann::json::parse(ds.scenario_json);
            if (j.is_object() && j.contains("rotation_ranges"))
                return scenario_from_json(j).rotation_enabled();
        }
        catch (const std::exception &)
        {
        }
        return cfg.scenario.rotation_enabled();
    }

    RunContext run_context(const ExperimentConfig &cfg, bool rotation_enabled)
    {
        RunContext ctx;
        ctx.n_probe = cfg.gf.n_probe;
        ctx.gamma = cfg.gf.gamma;
        ctx.noise_psd_dbm_hz = cfg.budget.noise_psd_dbm_hz;
        ctx.train_nmse_db = cfg.dataset.train_nmse_db;
        ctx.feedback_m = cfg.gf.feedback_top_m.value_or(0);
        ctx.rotation_enabled = rotation_enabled;
        return ctx;
    }

    OverheadParams overhead_params(const ExperimentConfig &cfg, const Codebook &cb_t, const Codebook &cb_r)
    {
        OverheadParams p = cfg.overhead;
        p.m_t = static_cast<int>(cb_t.size());
        p.m_r = static_cast<int>(cb_r.size());
        p.cb_topk_per_dim = cfg.codebook.topk;
        p.n_probe = cfg.gf.n_probe;
        return p;
    }

    EvalOutputs evaluate_models(const ExperimentConfig &cfg, const Dataset &ds, Split eval_split, const GfModel *gf,
                                const CbModel *cb, const RunContext &ctx)
    {
        const auto samples = ds.subset(eval_split);
        if (samples.empty())
            throw ConfigError(std::string("The dataset has no samples in the ") + split_name(eval_split) + " split.");
        const auto [cb_t, cb_r] = make_codebooks(cfg, &ds);

        EvalSetup setup;
        setup.methods = cfg.eval.methods;
        setup.gf = gf;
        setup.cb = cb;
        setup.cb_t = &cb_t;
        setup.cb_r = &cb_r;
        setup.cb_topk = cfg.codebook.topk;
        setup.budget = cfg.budget;
        setup.seed = cfg.eval.seed;
        setup.measurement_noise = cfg.eval.measurement_noise;

        EvalOutputs out;
        out.records = evaluate_all(setup, samples);
        if (gf && has_method(cfg, {Method::dl_gf}))
            out.misdetection_gf = misdetection_probability(*gf, samples, cfg.budget, gf->config.snr_threshold_db);
        if (cb && has_method(cfg, {Method::dl_cb_top1, Method::dl_cb_topk}))
            out.misdetection_cb = misdetection_probability(*cb, samples, cfg.budget, cb->config.snr_threshold_db);

        const OverheadParams op = overhead_params(cfg, cb_t, cb_r);
        out.summary = summarize(out.records, ctx, op, out.misdetection_gf, out.misdetection_cb, cfg.eval.linear_mean);
        if (has_method(cfg, {Method::dl_gf, Method::dl_cb_top1, Method::dl_cb_topk, Method::exhaustive}))
            out.speed = snr_vs_speed(out.summary, cfg.k_values, op);
        return out;
    }

    PointResult run_point(const ExperimentConfig &cfg, const Dataset &ds, Split eval_split, const ProgressFn &progress)
    {
        cfg.validate();
        const auto [cb_t, cb_r] = make_codebooks(cfg, &ds);
        PointResult r;
        {
            const Dataset train = training_view(ds, cfg);
            if (has_method(cfg, {Method::dl_gf}))
                r.gf = train_gf(train, cfg.budget, cfg.gf, cfg.train, progress);
            if (has_method(cfg, {Method::dl_cb_top1, Method::dl_cb_topk}))
                r.cb = train_cb(train, cfg.budget, cfg.cb, cfg.train, cb_t, cb_r, label_dataset(train, cb_t, cb_r),
                                progress);
        }
        r.context = run_context(cfg, dataset_rotation_enabled(ds, cfg));
        auto ev = evaluate_models(cfg, ds, eval_split, r.gf ? &r.gf->model : nullptr, r.cb ? &r.cb->model : nullptr,
                                  r.context);
        r.records = std::move(ev.records);
        r.summary = std::move(ev.summary);
        r.speed = std::move(ev.speed);
        r.misdetection_gf = ev.misdetection_gf;
        r.misdetection_cb = ev.misdetection_cb;
        return r;
    }

    SweepAxis parse_axis(std::string_view name)
    {
        for (SweepAxis a : {SweepAxis::n_probe, SweepAxis::gamma, SweepAxis::noise_psd, SweepAxis::nmse,
                            SweepAxis::feedback_m, SweepAxis::rotation})
            if (name == axis_name(a))
                return a;
        throw ConfigError("Unknown sweep axis '" + std::string(name) +
                          "' (expected n_probe, gamma, noise_psd, nmse, feedback_m or rotation).");
    }

    const char *axis_name(SweepAxis a)
    {
        switch (a)
        {
        case SweepAxis::n_probe:
            return "n_probe";
        case SweepAxis::gamma:
            return "gamma";
        case SweepAxis::noise_psd:
            return "noise_psd";
        case SweepAxis::nmse:
            return "nmse";
        case SweepAxis::feedback_m:
            return "feedback_m";
        case SweepAxis::rotation:
            return "rotation";
        }
        return "?";
    }

    std::vector<std::string> default_grid(const ExperimentConfig &cfg, SweepAxis axis)
    {
        std::vector<std::string> g;
        auto add_all = [&](const auto &values) {
            for (const auto &v : values)
            {
                if constexpr (std::is_same_v<std::decay_t<decltype(v)>, int>)
                    g.push_back(std::to_string(v));
                else
                    g.push_back(format_double(v));
            }
        };
        switch (axis)
        {
        case SweepAxis::n_probe:
            add_all(cfg.sweep.n_probe);
            break;
        case SweepAxis::gamma:
            add_all(cfg.sweep.gamma);
            break;
        case SweepAxis::noise_psd:
            add_all(cfg.sweep.noise_psd);
            break;
        case SweepAxis::nmse:
            add_all(cfg.sweep.nmse_db);
            break;
        case SweepAxis::feedback_m:
            add_all(cfg.sweep.feedback_m);
            break;
        case SweepAxis::rotation:
            g = {"on", "off"};
            break;
        }
        if (g.empty())
            throw ConfigError(std::string("No grid for axis '") + axis_name(axis) +
                              "': set it in the config sweep section or pass --grid.");
        return g;
    }

    ExperimentConfig apply_axis(const ExperimentConfig &cfg, SweepAxis axis, const std::string &value)
    {
        ExperimentConfig c = cfg;
        switch (axis)
        {
        case SweepAxis::n_probe:
            c.gf.n_probe = c.cb.n_probe = c.overhead.n_probe = parse_int(value, axis);
            break;
        case SweepAxis::gamma:
            c.gf.gamma = c.cb.gamma = parse_real(value, axis);
            break;
        case SweepAxis::noise_psd:
            c.budget.noise_psd_dbm_hz = parse_real(value, axis);
            break;
        case SweepAxis::nmse:
            c.dataset.train_nmse_db = parse_real(value, axis);
            break;
        case SweepAxis::feedback_m:
        {
            const int m = parse_int(value, axis);
            if (m < 0)
                throw ConfigError("feedback_m grid values must be non-negative.");
            c.gf.feedback_top_m = c.cb.feedback_top_m = m > 0 ? std::optional<int>(m) : std::nullopt;
            break;
        }
        case SweepAxis::rotation:
            if (value == "off" || value == "0" || value == "false")
                c.scenario.rotation_ranges = {Interval{0, 0}, Interval{0, 0}, Interval{0, 0}};
            else if (value == "on" || value == "1" || value == "true")
            {
                if (!c.scenario.rotation_enabled())
                    c.scenario.rotation_ranges = ScenarioConfig{}.rotation_ranges;
            }
            else
                throw ConfigError("Rotation grid values must be on or off, got '" + value + "'.");
            break;
        }
        c.validate();
        return c;
    }
}
