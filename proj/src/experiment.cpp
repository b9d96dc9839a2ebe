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

#include "gfbeam/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace gfbeam
{
    using nlohmann::json;

    namespace
    {
        class Obj
        {
          public:
            Obj(const json &j, std::string ctx) : j_(j), ctx_(std::move(ctx))
            {
                if (!j_.is_object())
                    throw ConfigError("Config section '" + ctx_ + "' must be an object.");
            }

            template <class T>
            void get(const char *key, T &out)
            {
                seen_.insert(key);
                if (!j_.contains(key))
                    return;
                try
                {
                    out = j_.at(key).get<T>();
                }
                catch (const json::exception &)
                {
                    throw ConfigError("Config key '" + path(key) + "' has the wrong type.");
                }
            }

            // Numbers, null (-inf) or the strings "inf" / "-inf".
            void get_real(const char *key, double &out)
            {
                seen_.insert(key);
                if (!j_.contains(key))
                    return;
                const json &v = j_.at(key);
                if (v.is_number())
                    out = v.get<double>();
                else if (v.is_null() || v == "-inf")
                    out = -INFINITY;
                else if (v == "inf")
                    out = INFINITY;
                else
                    throw ConfigError("Config key '" + path(key) + "' must be a number.");
            }

            const json *sub(const char *key)
            {
                seen_.insert(key);
                return j_.contains(key) ? &j_.at(key) : nullptr;
            }

            std::string path(const std::string &key) const { return ctx_.empty() ? key : ctx_ + "." + key; }

            void finish() const
            {
                for (const auto &item : j_.items())
                    if (!seen_.count(item.key()))
                        throw ConfigError("Unknown config key '" + path(item.key()) + "'.");
            }

          private:
            const json &j_;
            std::string ctx_;
            std::set<std::string> seen_;
        };

        json real(double v)
        {
            if (std::isinf(v))
                return v < 0 ? json(nullptr) : json("inf");
            return v;
        }

        json array_json(const ArrayConfig &a) { return {{"n_y", a.n_y}, {"n_z", a.n_z}, {"spacing", a.spacing}}; }

        ArrayConfig array_from(const json &j, const std::string &ctx)
        {
            ArrayConfig a;
            Obj o(j, ctx);
            o.get("n_y", a.n_y);
            o.get("n_z", a.n_z);
            o.get("spacing", a.spacing);
            o.finish();
            return a;
        }

        json cluster_json(const Cluster &c)
        {
            return {{"aod_az_center", c.aod_az_center}, {"aod_el_center", c.aod_el_center},
                    {"aoa_az_center", c.aoa_az_center}, {"aoa_el_center", c.aoa_el_center},
                    {"angular_spread", c.angular_spread}, {"gain_db_mean", c.gain_db_mean},
                    {"gain_db_std", c.gain_db_std}};
        }

        Cluster cluster_from(const json &j, const std::string &ctx)
        {
            Cluster c;
            Obj o(j, ctx);
            o.get("aod_az_center", c.aod_az_center);
            o.get("aod_el_center", c.aod_el_center);
            o.get("aoa_az_center", c.aoa_az_center);
            o.get("aoa_el_center", c.aoa_el_center);
            o.get("angular_spread", c.angular_spread);
            o.get("gain_db_mean", c.gain_db_mean);
            o.get("gain_db_std", c.gain_db_std);
            o.finish();
            return c;
        }

        std::vector<Method> methods_from(const json &j)
        {
            if (!j.is_array())
                throw ConfigError("Config key 'eval.methods' must be a list of method names.");
            std::vector<Method> out;
            for (const auto &m : j)
            {
                if (!m.is_string())
                    throw ConfigError("Config key 'eval.methods' must be a list of method names.");
                out.push_back(parse_method(m.get<std::string>()));
            }
            return out;
        }
    }

    void CodebookConfig::validate() const
    {
        if (tx_q_y < 1 || tx_q_z < 1 || rx_q_y < 1 || rx_q_z < 1)
            throw ConfigError("Codebook oversampling factors must be at least 1.");
        if (topk < 1)
            throw ConfigError("codebook.topk must be at least 1.");
    }

    void DatasetConfig::validate() const
    {
        if (num_samples < 5)
            throw ConfigError("dataset.num_samples must be at least 5.");
        if (split.train < 0 || split.val < 0 || split.test < 0 ||
            std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
            throw ConfigError("dataset.split fractions must be non-negative and sum to 1.");
        if (std::isnan(train_nmse_db) || train_nmse_db == INFINITY)
            throw ConfigError("dataset.train_nmse_db must be finite or -inf.");
    }

    void ExperimentConfig::validate() const
    {
        scenario.validate();
        dataset.validate();
        budget.validate();
        gf.validate();
        cb.validate();
        codebook.validate();
        train.validate();
        overhead.validate();
        if (eval.methods.empty())
            throw ConfigError("eval.methods must not be empty.");
        for (int k : k_values)
            if (k < 1)
                throw ConfigError("k_values must be positive.");
        for (int n : sweep.n_probe)
            if (n < 1)
                throw ConfigError("sweep.n_probe entries must be positive.");
        for (double g : sweep.gamma)
            if (!(g >= 0.0 && g <= 1.0))
                throw ConfigError("sweep.gamma entries must lie in [0, 1].");
        for (int m : sweep.feedback_m)
            if (m < 0)
                throw ConfigError("sweep.feedback_m entries must be non-negative.");
    }

    json to_json(const ScenarioConfig &cfg)
    {
        json clusters = json::array();
        for (const auto &c : cfg.clusters)
            clusters.push_back(cluster_json(c));
        json rot = json::array();
        for (const auto &r : cfg.rotation_ranges)
            rot.push_back({r.lo, r.hi});
        return {{"tx_array", array_json(cfg.tx_array)},
                {"rx_array", array_json(cfg.rx_array)},
                {"bandwidth_hz", cfg.bandwidth_hz},
                {"num_paths", cfg.num_paths},
                {"clusters", clusters},
                {"delay_spread_s", cfg.delay_spread_s},
                {"rotation_ranges", rot},
                {"seed", cfg.seed}};
    }

    ScenarioConfig scenario_from_json(const json &j)
    {
        ScenarioConfig cfg;
        Obj o(j, "scenario");
        if (const auto *a = o.sub("tx_array"))
            cfg.tx_array = array_from(*a, "scenario.tx_array");
        if (const auto *a = o.sub("rx_array"))
            cfg.rx_array = array_from(*a, "scenario.rx_array");
        o.get("bandwidth_hz", cfg.bandwidth_hz);
        o.get("num_paths", cfg.num_paths);
        if (const auto *c = o.sub("clusters"))
        {
            if (!c->is_array())
                throw ConfigError("Config key 'scenario.clusters' must be a list.");
            cfg.clusters.clear();
            for (std::size_t i = 0; i < c->size(); ++i)
                cfg.clusters.push_back(cluster_from((*c)[i], "scenario.clusters[" + std::to_string(i) + "]"));
        }
        o.get("delay_spread_s", cfg.delay_spread_s);
        if (const auto *r = o.sub("rotation_ranges"))
        {
            if (!r->is_array() || r->size() != 3)
                throw ConfigError("Config key 'scenario.rotation_ranges' must hold three [lo, hi] pairs.");
            for (std::size_t i = 0; i < 3; ++i)
            {
                const auto &p = (*r)[i];
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    throw ConfigError("Config key 'scenario.rotation_ranges' must hold three [lo, hi] pairs.");
                cfg.rotation_ranges[i] = {p[0].get<double>(), p[1].get<double>()};
            }
        }
        o.get("seed", cfg.seed);
        o.finish();
        return cfg;
    }

    json to_json(const GfConfig &cfg)
    {
        return {{"n_probe", cfg.n_probe},
                {"hidden_width", cfg.hidden_width},
                {"feature_scale", cfg.feature_scale == FeatureScale::linear ? "linear" : "log_standardized"},
                {"gamma", cfg.gamma},
                {"snr_threshold_db", cfg.snr_threshold_db},
                {"include_measurement_noise", cfg.include_measurement_noise},
                {"feedback_top_m", cfg.feedback_top_m ? json(*cfg.feedback_top_m) : json(nullptr)},
                {"seed", cfg.seed}};
    }

    GfConfig gf_config_from_json(const json &j, const std::string &section)
    {
        GfConfig cfg;
        Obj o(j, section);
        o.get("n_probe", cfg.n_probe);
        o.get("hidden_width", cfg.hidden_width);
        std::string scale = cfg.feature_scale == FeatureScale::linear ? "linear" : "log_standardized";
        o.get("feature_scale", scale);
        if (scale == "linear")
            cfg.feature_scale = FeatureScale::linear;
        else if (scale == "log_standardized")
            cfg.feature_scale = FeatureScale::log_standardized;
        else
            throw ConfigError("feature_scale must be 'linear' or 'log_standardized'.");
        o.get("gamma", cfg.gamma);
        o.get("snr_threshold_db", cfg.snr_threshold_db);
        o.get("include_measurement_noise", cfg.include_measurement_noise);
        if (const auto *m = o.sub("feedback_top_m"); m && !m->is_null())
        {
            if (!m->is_number_integer())
                throw ConfigError("feedback_top_m must be an integer or null.");
            const int v = m->get<int>();
            cfg.feedback_top_m = v > 0 ? std::optional<int>(v) : std::nullopt;
        }
        o.get("seed", cfg.seed);
        o.finish();
        return cfg;
    }

    json to_json(const TrainConfig &cfg)
    {
        return {{"epochs", cfg.epochs}, {"batch_size", cfg.batch_size}, {"lr", cfg.lr},
                {"seed", cfg.seed},     {"shuffle", cfg.shuffle},       {"log_every", cfg.log_every}};
    }

    TrainConfig train_config_from_json(const json &j)
    {
        TrainConfig cfg;
        Obj o(j, "train");
        o.get("epochs", cfg.epochs);
        o.get("batch_size", cfg.batch_size);
        o.get("lr", cfg.lr);
        o.get("seed", cfg.seed);
        o.get("shuffle", cfg.shuffle);
        o.get("log_every", cfg.log_every);
        o.finish();
        return cfg;
    }

    ExperimentConfig experiment_from_json(const json &j)
    {
        ExperimentConfig cfg;
        Obj o(j, "");
        o.get("seed", cfg.seed);
        o.get("output_dir", cfg.output_dir);
        if (const auto *s = o.sub("scenario"))
            cfg.scenario = scenario_from_json(*s);
        if (const auto *d = o.sub("dataset"))
        {
            Obj od(*d, "dataset");
            od.get("num_samples", cfg.dataset.num_samples);
            if (const auto *sp = od.sub("split"))
            {
                Obj os(*sp, "dataset.split");
                os.get("train", cfg.dataset.split.train);
                os.get("val", cfg.dataset.split.val);
                os.get("test", cfg.dataset.split.test);
                os.finish();
            }
            od.get_real("train_nmse_db", cfg.dataset.train_nmse_db);
            od.finish();
        }
        if (const auto *b = o.sub("budget"))
        {
            Obj ob(*b, "budget");
            ob.get("tx_power_dbm", cfg.budget.tx_power_dbm);
            ob.get("noise_psd_dbm_hz", cfg.budget.noise_psd_dbm_hz);
            ob.get("bandwidth_hz", cfg.budget.bandwidth_hz);
            ob.finish();
        }
        if (const auto *g = o.sub("gf"))
            cfg.gf = gf_config_from_json(*g, "gf");
        if (const auto *g = o.sub("cb"))
            cfg.cb = gf_config_from_json(*g, "cb");
        else
            cfg.cb = cfg.gf;
        if (const auto *c = o.sub("codebook"))
        {
            Obj oc(*c, "codebook");
            oc.get("tx_q_y", cfg.codebook.tx_q_y);
            oc.get("tx_q_z", cfg.codebook.tx_q_z);
            oc.get("rx_q_y", cfg.codebook.rx_q_y);
            oc.get("rx_q_z", cfg.codebook.rx_q_z);
            oc.get("topk", cfg.codebook.topk);
            oc.finish();
        }
        if (const auto *t = o.sub("train"))
            cfg.train = train_config_from_json(*t);
        if (const auto *e = o.sub("eval"))
        {
            Obj oe(*e, "eval");
            if (const auto *m = oe.sub("methods"))
                cfg.eval.methods = methods_from(*m);
            oe.get("measurement_noise", cfg.eval.measurement_noise);
            oe.get("linear_mean", cfg.eval.linear_mean);
            oe.get("seed", cfg.eval.seed);
            oe.finish();
        }
        if (const auto *ov = o.sub("overhead"))
        {
            Obj oo(*ov, "overhead");
            oo.get("k_ues", cfg.overhead.k_ues);
            oo.get("n_probe", cfg.overhead.n_probe);
            oo.get("m_t", cfg.overhead.m_t);
            oo.get("m_r", cfg.overhead.m_r);
            oo.get("n_f_wide", cfg.overhead.n_f_wide);
            oo.get("n_w_wide", cfg.overhead.n_w_wide);
            oo.get("cb_topk_per_dim", cfg.overhead.cb_topk_per_dim);
            oo.finish();
        }
        o.get("k_values", cfg.k_values);
        if (const auto *s = o.sub("sweep"))
        {
            Obj os(*s, "sweep");
            os.get("n_probe", cfg.sweep.n_probe);
            os.get("gamma", cfg.sweep.gamma);
            os.get("noise_psd", cfg.sweep.noise_psd);
            os.get("nmse_db", cfg.sweep.nmse_db);
            os.get("feedback_m", cfg.sweep.feedback_m);
            os.finish();
        }
        o.finish();
        cfg.validate();
        return cfg;
    }

    json to_json(const ExperimentConfig &cfg)
    {
        json methods = json::array();
        for (Method m : cfg.eval.methods)
            methods.push_back(method_name(m));
        return {
            {"seed", cfg.seed},
            {"output_dir", cfg.output_dir},
            {"scenario", to_json(cfg.scenario)},
            {"dataset",
             {{"num_samples", cfg.dataset.num_samples},
              {"split", {{"train", cfg.dataset.split.train}, {"val", cfg.dataset.split.val}, {"test", cfg.dataset.split.test}}},
              {"train_nmse_db", real(cfg.dataset.train_nmse_db)}}},
            {"budget",
             {{"tx_power_dbm", cfg.budget.tx_power_dbm},
              {"noise_psd_dbm_hz", real(cfg.budget.noise_psd_dbm_hz)},
              {"bandwidth_hz", cfg.budget.bandwidth_hz}}},
            {"gf", to_json(cfg.gf)},
            {"cb", to_json(cfg.cb)},
            {"codebook",
             {{"tx_q_y", cfg.codebook.tx_q_y}, {"tx_q_z", cfg.codebook.tx_q_z}, {"rx_q_y", cfg.codebook.rx_q_y},
              {"rx_q_z", cfg.codebook.rx_q_z}, {"topk", cfg.codebook.topk}}},
            {"train", to_json(cfg.train)},
            {"eval",
             {{"methods", methods}, {"measurement_noise", cfg.eval.measurement_noise},
              {"linear_mean", cfg.eval.linear_mean}, {"seed", cfg.eval.seed}}},
            {"overhead",
             {{"k_ues", cfg.overhead.k_ues}, {"n_probe", cfg.overhead.n_probe}, {"m_t", cfg.overhead.m_t},
              {"m_r", cfg.overhead.m_r}, {"n_f_wide", cfg.overhead.n_f_wide}, {"n_w_wide", cfg.overhead.n_w_wide},
              {"cb_topk_per_dim", cfg.overhead.cb_topk_per_dim}}},
            {"k_values", cfg.k_values},
            {"sweep",
             {{"n_probe", cfg.sweep.n_probe}, {"gamma", cfg.sweep.gamma}, {"noise_psd", cfg.sweep.noise_psd},
              {"nmse_db", cfg.sweep.nmse_db}, {"feedback_m", cfg.sweep.feedback_m}}},
        };
    }

    ExperimentConfig load_experiment_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("Cannot open config file '" + path.string() + "'.");
        json j;
        try
        {
            j = json::parse(in);
        }
        catch (const json::exception &e)
        {
            throw ConfigError("Config file '" + path.string() + "' is not valid JSON: " + e.what());
        }
        return experiment_from_json(j);
    }
}
