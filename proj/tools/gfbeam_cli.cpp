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

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gfbeam;

namespace
{
    constexpr int kExitConfig = 2;
    constexpr int kExitRuntime = 3;

    struct Common
    {
        std::string config;
        std::string out;
        std::optional<std::uint64_t> seed;
        bool quiet = false;
    };

    ExperimentConfig load_config(const Common &c)
    {
        ExperimentConfig cfg = load_experiment_config(c.config);
        if (c.seed)
            apply_root_seed(cfg, *c.seed);
        return cfg;
    }

    fs::path prepare_out(const std::string &out)
    {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec || !fs::is_directory(out))
            throw ConfigError("Cannot create output directory '" + out + "'.");
        return fs::path(out);
    }

    json seeds_json(const ExperimentConfig &cfg)
    {
        return {{"root", cfg.seed},         {"scenario", cfg.scenario.seed}, {"gf", cfg.gf.seed},
                {"cb", cfg.cb.seed},        {"train", cfg.train.seed},       {"eval", cfg.eval.seed}};
    }

    json input_entry(const fs::path &p) { return {{"name", p.filename().string()}, {"sha256", sha256_file(p)}}; }

    // Appends this run to <out>/manifest.json and refreshes the listing of every file under out.
    void write_manifest(const fs::path &out, const std::string &command, const ExperimentConfig *cfg,
                        const json &inputs, const std::vector<std::string> &written)
    {
        const fs::path path = out / "manifest.json";
        json m = json::object();
        if (fs::exists(path))
        {
            std::ifstream in(path);
            try
            {
                m = json::parse(in);
            }
            catch (const json::exception &)
            {
                m = json::object();
            }
        }
        json run = {{"command", command}, {"inputs", inputs}, {"outputs", written}};
        if (cfg)
        {
            const std::string dump = to_json(*cfg).dump();
            run["config_sha256"] = sha256_hex(dump);
            run["seeds"] = seeds_json(*cfg);
            run["config"] = to_json(*cfg);
        }
        m["tool"] = "gfbeam";
        m["runs"].push_back(run);

        std::vector<fs::path> files;
        for (const auto &e : fs::recursive_directory_iterator(out))
            if (e.is_regular_file() && e.path().filename() != "manifest.json")
                files.push_back(fs::relative(e.path(), out));
        std::sort(files.begin(), files.end());
        json listing = json::array();
        for (const auto &f : files)
            listing.push_back({{"name", f.generic_string()},
                               {"bytes", fs::file_size(out / f)},
                               {"sha256", sha256_file(out / f)}});
        m["files"] = listing;

        std::ofstream o(path);
        if (!o)
            throw ConfigError("Cannot write '" + path.string() + "'.");
        o << m.dump(2) << '\n';
    }

    ProgressFn progress_printer(bool quiet, const std::string &tag)
    {
        if (quiet)
            return {};
        return [tag](const HistoryRow &h) {
            std::fprintf(stderr, "[%s] epoch %d  utility %.5g  val snr %.3f dB  val ubf %.4f  misdet %.4f\n",
                         tag.c_str(), h.epoch, h.train_utility, h.val_avg_snr_db, h.val_ubf, h.val_misdetection);
        };
    }

    std::vector<std::string> split_list(const std::string &s)
    {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (!item.empty())
                out.push_back(item);
        }
        return out;
    }

    Split parse_split(const std::string &s)
    {
        if (s == "train")
            return Split::train;
        if (s == "val")
            return Split::val;
        if (s == "test")
            return Split::test;
        throw ConfigError("Unknown split '" + s + "'.");
    }

    void print_summary(const std::vector<SummaryRow> &rows)
    {
        std::printf("%-12s %8s %8s %8s %8s %8s %10s\n", "method", "p10", "p50", "p90", "mean", "misdet", "overhead");
        for (const auto &r : rows)
        {
            std::printf("%-12s %8.2f %8.2f %8.2f %8.2f ", method_name(r.method), r.snr.p10, r.snr.p50, r.snr.p90,
                        r.snr.mean);
            if (r.misdetection)
                std::printf("%8.4f ", *r.misdetection);
            else
                std::printf("%8s ", "-");
            if (r.overhead > 0)
                std::printf("%10lld\n", static_cast<long long>(r.overhead));
            else
                std::printf("%10s\n", "-");
        }
    }

    // ---- subcommands ----

    int cmd_gen(const Common &c, std::optional<std::size_t> samples)
    {
        ExperimentConfig cfg = load_config(c);
        if (samples)
            cfg.dataset.num_samples = *samples;
        const fs::path out = prepare_out(c.out);
        const Dataset ds = generate_dataset(cfg);
        save_dataset(ds, out / "channels.bin");
        std::printf("seed %llu\n", static_cast<unsigned long long>(cfg.seed));
        std::printf("samples %zu (train %zu, val %zu, test %zu)\n", ds.size(), ds.indices(Split::train).size(),
                    ds.indices(Split::val).size(), ds.indices(Split::test).size());
        write_manifest(out, "gen", &cfg, json::array({input_entry(c.config)}), {"channels.bin"});
        return 0;
    }

    int cmd_train(const Common &c, const std::string &kind, const std::string &data, std::optional<int> epochs)
    {
        ExperimentConfig cfg = load_config(c);
        if (epochs)
            cfg.train.epochs = *epochs;
        cfg.validate();
        const fs::path out = prepare_out(c.out);
        const Dataset ds = load_dataset(data);
        const Dataset train = training_view(ds, cfg);
        std::printf("seed %llu\n", static_cast<unsigned long long>(cfg.seed));

        std::vector<std::string> written;
        if (kind == "gf")
        {
            const auto r = train_gf(train, cfg.budget, cfg.gf, cfg.train, progress_printer(c.quiet, "gf"));
            save_model(r.model, out / "gf_model.bin");
            write_history_csv(out / "gf_history.csv", r.history);
            written = {"gf_model.bin", "gf_history.csv"};
            std::printf("best epoch %d  val snr %.3f dB\n", r.best_epoch,
                        r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_avg_snr_db);
        }
        else
        {
            const auto [cb_t, cb_r] = make_codebooks(cfg, &ds);
            const auto labels = label_dataset(train, cb_t, cb_r);
            const auto r = train_cb(train, cfg.budget, cfg.cb, cfg.train, cb_t, cb_r, labels,
                                    progress_printer(c.quiet, "cb"));
            save_model(r.model, out / "cb_model.bin");
            write_history_csv(out / "cb_history.csv", r.history);
            written = {"cb_model.bin", "cb_history.csv"};
            std::printf("best epoch %d  val top-1 snr %.3f dB\n", r.best_epoch,
                        r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_avg_snr_db);
        }
        write_manifest(out, "train " + kind, &cfg, json::array({input_entry(c.config), input_entry(data)}), written);
        return 0;
    }

    void write_eval_outputs(const fs::path &dir, const std::vector<EvalRecord> &records, const RunContext &ctx,
                            const std::vector<SummaryRow> &summary, const std::vector<SpeedRow> &speed,
                            std::vector<std::string> &written, const std::string &prefix = "")
    {
        write_records_csv(dir / "records.csv", records, ctx);
        write_summary_csv(dir / "summary.csv", summary);
        written.push_back(prefix + "records.csv");
        written.push_back(prefix + "summary.csv");
        if (!speed.empty())
        {
            write_speed_csv(dir / "speed.csv", speed);
            written.push_back(prefix + "speed.csv");
        }
    }

    int cmd_eval(const Common &c, const std::string &data, const std::string &gf_path, const std::string &cb_path,
                 const std::string &methods, const std::string &split)
    {
        ExperimentConfig cfg = load_config(c);
        const fs::path out = prepare_out(c.out);
        const Dataset ds = load_dataset(data);
        json inputs = json::array({input_entry(c.config), input_entry(data)});

        std::optional<GfModel> gf;
        std::optional<CbModel> cb;
        if (!gf_path.empty())
        {
            gf = load_gf_model(gf_path);
            cfg.gf = gf->config;
            inputs.push_back(input_entry(gf_path));
        }
        if (!cb_path.empty())
        {
            cb = load_cb_model(cb_path);
            cfg.cb = cb->config;
            inputs.push_back(input_entry(cb_path));
        }

        if (!methods.empty())
        {
            cfg.eval.methods.clear();
            for (const auto &m : split_list(methods))
                cfg.eval.methods.push_back(parse_method(m));
        }
        else
        {
            // config method list: skip learned methods whose model was not supplied
            std::vector<Method> kept;
            for (Method m : cfg.eval.methods)
            {
                const bool needs_gf = m == Method::dl_gf;
                const bool needs_cb = m == Method::dl_cb_top1 || m == Method::dl_cb_topk;
                if ((needs_gf && !gf) || (needs_cb && !cb))
                {
                    if (!c.quiet)
                        std::fprintf(stderr, "note: skipping %s (no model given)\n", method_name(m));
                    continue;
                }
                kept.push_back(m);
            }
            cfg.eval.methods = kept;
        }
        cfg.validate();

        const RunContext ctx = run_context(cfg, dataset_rotation_enabled(ds, cfg));
        const auto ev = evaluate_models(cfg, ds, parse_split(split), gf ? &*gf : nullptr, cb ? &*cb : nullptr, ctx);
        std::vector<std::string> written;
        write_eval_outputs(out, ev.records, ctx, ev.summary, ev.speed, written);
        std::printf("seed %llu\n", static_cast<unsigned long long>(cfg.seed));
        print_summary(ev.summary);
        write_manifest(out, "eval", &cfg, inputs, written);
        return 0;
    }

    std::string point_dir_name(std::size_t i, SweepAxis axis, const std::string &value)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "point_%02zu_", i);
        return buf + std::string(axis_name(axis)) + "_" + value;
    }

    int cmd_sweep(const Common &c, const std::string &axis_str, const std::string &grid_str, const std::string &data,
                  int jobs)
    {
        const ExperimentConfig base = load_config(c);
        const SweepAxis axis = parse_axis(axis_str);
        const auto grid = grid_str.empty() ? default_grid(base, axis) : split_list(grid_str);
        if (grid.empty())
            throw ConfigError("--grid is empty.");
        if (jobs < 1)
            throw ConfigError("--jobs must be at least 1.");

        std::vector<ExperimentConfig> cfgs;
        for (const auto &v : grid)
            cfgs.push_back(apply_axis(base, axis, v));
        const fs::path out = prepare_out(c.out);
        json inputs = json::array({input_entry(c.config)});

        // rotation changes the scenario, so each point generates its own data
        std::optional<Dataset> shared;
        if (!data.empty())
        {
            if (axis == SweepAxis::rotation)
                throw ConfigError("--data cannot be combined with the rotation axis.");
            shared = load_dataset(data);
            inputs.push_back(input_entry(data));
        }
        else if (axis != SweepAxis::rotation)
            shared = generate_dataset(base);

        std::vector<std::optional<PointResult>> results(grid.size());
        std::vector<std::exception_ptr> errors(grid.size());
        std::atomic<std::size_t> next{0};
        std::mutex log_mutex;
        auto worker = [&] {
            for (std::size_t i = next++; i < grid.size(); i = next++)
            {
                try
                {
                    ProgressFn progress;
                    if (!c.quiet)
                        progress = [&, i](const HistoryRow &h) {
                            std::lock_guard lock(log_mutex);
                            std::fprintf(stderr, "[%s=%s] epoch %d  utility %.5g  val snr %.3f dB\n", axis_name(axis),
                                         grid[i].c_str(), h.epoch, h.train_utility, h.val_avg_snr_db);
                        };
                    if (shared)
                        results[i] = run_point(cfgs[i], *shared, Split::test, progress);
                    else
                        results[i] = run_point(cfgs[i], generate_dataset(cfgs[i]), Split::test, progress);
                }
                catch (...)
                {
                    errors[i] = std::current_exception();
                }
            }
        };
        const int n_threads = std::min<int>(jobs, static_cast<int>(grid.size()));
        std::vector<std::thread> pool;
        for (int t = 1; t < n_threads; ++t)
            pool.emplace_back(worker);
        worker();
        for (auto &t : pool)
            t.join();
        for (const auto &e : errors)
            if (e)
                std::rethrow_exception(e);

        std::vector<EvalRecord> all_records;
        std::vector<SummaryRow> all_summary;
        std::vector<SpeedRow> all_speed;
        std::vector<std::string> written;
        std::ofstream rec_out(out / "sweep_records.csv");
        if (!rec_out)
            throw ConfigError("Cannot write into '" + out.string() + "'.");
        bool header_done = false;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const auto &r = *results[i];
            const std::string name = point_dir_name(i, axis, grid[i]);
            const fs::path dir = prepare_out((out / name).string());
            write_eval_outputs(dir, r.records, r.context, r.summary, r.speed, written, name + "/");
            if (r.gf)
            {
                save_model(r.gf->model, dir / "gf_model.bin");
                write_history_csv(dir / "gf_history.csv", r.gf->history);
                written.push_back(name + "/gf_model.bin");
                written.push_back(name + "/gf_history.csv");
            }
            if (r.cb)
            {
                save_model(r.cb->model, dir / "cb_model.bin");
                write_history_csv(dir / "cb_history.csv", r.cb->history);
                written.push_back(name + "/cb_model.bin");
                written.push_back(name + "/cb_history.csv");
            }
            // concatenate the per-point records below a single header
            std::ifstream in(dir / "records.csv");
            std::string line;
            std::getline(in, line);
            if (!header_done)
            {
                rec_out << line << '\n';
                header_done = true;
            }
            while (std::getline(in, line))
                rec_out << line << '\n';
            all_summary.insert(all_summary.end(), r.summary.begin(), r.summary.end());
            all_speed.insert(all_speed.end(), r.speed.begin(), r.speed.end());
        }
        rec_out.close();
        write_summary_csv(out / "sweep_summary.csv", all_summary);
        written.push_back("sweep_records.csv");
        written.push_back("sweep_summary.csv");
        if (!all_speed.empty())
        {
            write_speed_csv(out / "sweep_speed.csv", all_speed);
            written.push_back("sweep_speed.csv");
        }
        std::printf("seed %llu\n", static_cast<unsigned long long>(base.seed));
        std::printf("axis %s, %zu points\n", axis_name(axis), grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            std::printf("\n%s = %s\n", axis_name(axis), grid[i].c_str());
            print_summary(results[i]->summary);
        }
        write_manifest(out, std::string("sweep ") + axis_name(axis), &base, inputs, written);
        return 0;
    }

    std::vector<double> az_grid(int points)
    {
        if (points < 2)
            throw ConfigError("--points must be at least 2.");
        std::vector<double> g(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i)
            g[static_cast<std::size_t>(i)] = -kPi + 2.0 * kPi * i / (points - 1);
        return g;
    }

    int cmd_patterns(const Common &c, const std::string &model_path, const std::string &beams,
                     std::optional<std::int64_t> sample_id, const std::string &data, int points, double elevation)
    {
        const ExperimentConfig cfg = load_config(c);
        const fs::path out = prepare_out(c.out);
        const auto grid = az_grid(points);
        const ArrayConfig &tx = cfg.scenario.tx_array, &rx = cfg.scenario.rx_array;
        json inputs = json::array({input_entry(c.config), input_entry(model_path)});
        std::vector<std::string> written;

        auto emit = [&](const std::string &name, const CVector &v, const ArrayConfig &arr) {
            if (v.size() != arr.size())
                throw ConfigError("Beam length " + std::to_string(v.size()) + " does not match the " +
                                  std::to_string(arr.size()) + "-element array in the config.");
            write_pattern_csv(out / name, grid, beam_pattern(v, arr, grid, elevation));
            written.push_back(name);
        };

        const ModelKind kind = model_kind(model_path);
        if (beams == "probing")
        {
            const ProbingModel m = kind == ModelKind::gf ? static_cast<ProbingModel>(load_gf_model(model_path))
                                                         : static_cast<ProbingModel>(load_cb_model(model_path));
            const CMatrix f = m.probing_tx(), w = m.probing_rx();
            for (Eigen::Index k = 0; k < f.cols(); ++k)
            {
                emit("probe_tx_" + std::to_string(k) + ".csv", f.col(k), tx);
                emit("probe_rx_" + std::to_string(k) + ".csv", w.col(k), rx);
            }
        }
        else
        {
            if (!sample_id)
                throw ConfigError("--beams synthesized requires --sample-id.");
            if (data.empty())
                throw ConfigError("--beams synthesized requires --data.");
            if (kind != ModelKind::gf)
                throw ConfigError("Synthesized beams need a DL-GF model.");
            const GfModel m = load_gf_model(model_path);
            const Dataset ds = load_dataset(data);
            inputs.push_back(input_entry(data));
            const auto it = std::find_if(ds.samples.begin(), ds.samples.end(),
                                         [&](const ChannelSample &s) { return s.id == *sample_id; });
            if (it == ds.samples.end())
                throw ConfigError("Sample id " + std::to_string(*sample_id) + " is not in the dataset.");
            const auto z = probe_forward(m, *it, cfg.budget, derive_seed(cfg.eval.seed, {static_cast<std::uint64_t>(*sample_id)}));
            const auto [v_t, v_r] = synthesize(m, z);
            emit("synth_tx.csv", v_t, tx);
            emit("synth_rx.csv", v_r, rx);
        }
        std::printf("seed %llu\n", static_cast<unsigned long long>(cfg.seed));
        std::printf("%zu pattern files written to %s\n", written.size(), out.string().c_str());
        write_manifest(out, "patterns " + beams, &cfg, inputs, written);
        return 0;
    }

    struct OverheadArgs
    {
        std::optional<int> n_probe, m_t, m_r, n_f, n_w, topk;
        std::string k_values;
    };

    int cmd_overhead(const Common &c, const OverheadArgs &a)
    {
        OverheadParams p;
        std::vector<int> ks{1, 2, 5, 10, 20, 50};
        std::optional<ExperimentConfig> cfg;
        if (!c.config.empty())
        {
            cfg = load_config(c);
            p = cfg->overhead;
            ks = cfg->k_values;
        }
        if (a.n_probe)
            p.n_probe = *a.n_probe;
        if (a.m_t)
            p.m_t = *a.m_t;
        if (a.m_r)
            p.m_r = *a.m_r;
        if (a.n_f)
            p.n_f_wide = *a.n_f;
        if (a.n_w)
            p.n_w_wide = *a.n_w;
        if (a.topk)
            p.cb_topk_per_dim = *a.topk;
        if (!a.k_values.empty())
        {
            ks.clear();
            for (const auto &s : split_list(a.k_values))
            {
                try
                {
                    ks.push_back(std::stoi(s));
                }
                catch (const std::exception &)
                {
                    throw ConfigError("--k-values entry '" + s + "' is not an integer.");
                }
            }
        }
        if (ks.empty())
            throw ConfigError("No K values given.");
        p.validate();
        for (int k : ks)
            if (k < 1)
                throw ConfigError("K values must be positive.");

        const Method methods[] = {Method::dl_gf, Method::dl_cb_top1, Method::dl_cb_topk, Method::hierarchical,
                                  Method::exhaustive};
        std::printf("%-13s", "method \\ K");
        for (int k : ks)
            std::printf(" %9d", k);
        std::printf("\n");
        std::ostringstream csv;
        csv << "method,k_ues,n_probe,m_t,m_r,n_f_wide,n_w_wide,cb_topk_per_dim,overhead,speed\n";
        for (Method m : methods)
        {
            std::printf("%-13s", method_name(m));
            for (int k : ks)
            {
                OverheadParams q = p;
                q.k_ues = k;
                const auto o = sweeping_overhead(m, q);
                std::printf(" %9lld", static_cast<long long>(o));
                csv << method_name(m) << ',' << k << ',' << q.n_probe << ',' << q.m_t << ',' << q.m_r << ','
                    << q.n_f_wide << ',' << q.n_w_wide << ',' << q.cb_topk_per_dim << ',' << o << ','
                    << format_double(1.0 / static_cast<double>(o)) << '\n';
            }
            std::printf("\n");
        }
        if (!c.out.empty())
        {
            const fs::path out = prepare_out(c.out);
            std::ofstream f(out / "overhead.csv");
            if (!f)
                throw ConfigError("Cannot write '" + (out / "overhead.csv").string() + "'.");
            f << csv.str();
            f.close();
            json inputs = json::array();
            if (!c.config.empty())
                inputs.push_back(input_entry(c.config));
            write_manifest(out, "overhead", cfg ? &*cfg : nullptr, inputs, {"overhead.csv"});
        }
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"gfbeam: grid-free MIMO beam alignment simulator"};
    app.require_subcommand(1);

    Common gen_c, train_c, eval_c, sweep_c, pat_c, ovh_c;
    auto add_common = [](CLI::App *sub, Common &c, bool config_required, bool out_required) {
        auto *opt = sub->add_option("--config", c.config, "Experiment config (JSON)");
        if (config_required)
            opt->required();
        auto *o = sub->add_option("--out", c.out, "Output directory");
        if (out_required)
            o->required();
        sub->add_option("--seed", c.seed, "Root seed; replaces every seed in the config");
        sub->add_flag("--quiet,-q", c.quiet, "No progress output");
    };

    auto *gen = app.add_subcommand("gen", "Generate a synthetic channel dataset");
    add_common(gen, gen_c, true, true);
    std::optional<std::size_t> gen_samples;
    gen->add_option("--samples", gen_samples, "Override dataset.num_samples");

    auto *train = app.add_subcommand("train", "Train a DL-GF or DL-CB model");
    add_common(train, train_c, true, true);
    std::string train_kind, train_data;
    std::optional<int> train_epochs;
    train->add_option("kind", train_kind, "gf or cb")->required()->check(CLI::IsMember({"gf", "cb"}));
    train->add_option("--data", train_data, "Channel file")->required();
    train->add_option("--epochs", train_epochs, "Override train.epochs");

    auto *eval = app.add_subcommand("eval", "Evaluate models and baselines");
    add_common(eval, eval_c, true, true);
    std::string eval_data, eval_gf, eval_cb, eval_methods, eval_split = "test";
    eval->add_option("--data", eval_data, "Channel file")->required();
    eval->add_option("--gf-model", eval_gf, "DL-GF model file");
    eval->add_option("--cb-model", eval_cb, "DL-CB model file");
    eval->add_option("--methods", eval_methods, "Comma-separated method list (default: config)");
    eval->add_option("--split", eval_split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));

    auto *sweep = app.add_subcommand("sweep", "Train and evaluate over a parameter grid");
    add_common(sweep, sweep_c, true, true);
    std::string sweep_axis, sweep_grid, sweep_data;
    int sweep_jobs = 1;
    sweep->add_option("--axis", sweep_axis, "n_probe, gamma, noise_psd, nmse, feedback_m or rotation")->required();
    sweep->add_option("--grid", sweep_grid, "Comma-separated grid values (default: config sweep section)");
    sweep->add_option("--data", sweep_data, "Channel file (default: generate from the config)");
    sweep->add_option("--jobs", sweep_jobs, "Parallel grid points");

    auto *pat = app.add_subcommand("patterns", "Export beam patterns");
    add_common(pat, pat_c, true, true);
    std::string pat_model, pat_beams = "probing", pat_data;
    std::optional<std::int64_t> pat_sample;
    int pat_points = 721;
    double pat_el = kPi / 2.0;
    pat->add_option("--model", pat_model, "Model file")->required();
    pat->add_option("--beams", pat_beams, "probing or synthesized")->check(CLI::IsMember({"probing", "synthesized"}));
    pat->add_option("--sample-id", pat_sample, "Sample for synthesized beams");
    pat->add_option("--data", pat_data, "Channel file for synthesized beams");
    pat->add_option("--points", pat_points, "Azimuth grid points over [-pi, pi]");
    pat->add_option("--elevation", pat_el, "Elevation of the cut [rad]");

    auto *ovh = app.add_subcommand("overhead", "Beam sweeping overhead table");
    add_common(ovh, ovh_c, false, false);
    OverheadArgs oa;
    ovh->add_option("--n-probe", oa.n_probe);
    ovh->add_option("--m-t", oa.m_t);
    ovh->add_option("--m-r", oa.m_r);
    ovh->add_option("--n-f", oa.n_f);
    ovh->add_option("--n-w", oa.n_w);
    ovh->add_option("--topk", oa.topk);
    ovh->add_option("--k-values", oa.k_values, "Comma-separated K values");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try
    {
        if (*gen)
            return cmd_gen(gen_c, gen_samples);
        if (*train)
            return cmd_train(train_c, train_kind, train_data, train_epochs);
        if (*eval)
            return cmd_eval(eval_c, eval_data, eval_gf, eval_cb, eval_methods, eval_split);
        if (*sweep)
            return cmd_sweep(sweep_c, sweep_axis, sweep_grid, sweep_data, sweep_jobs);
        if (*pat)
            return cmd_patterns(pat_c, pat_model, pat_beams, pat_sample, pat_data, pat_points, pat_el);
        if (*ovh)
            return cmd_overhead(ovh_c, oa);
    }
    catch (const ConfigError &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    catch (const NumericalError &e)
    {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitRuntime;
    }
    catch (const FormatError &e)
    {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitRuntime;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
