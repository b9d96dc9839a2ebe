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

#include "catch_amalgamated.hpp"

#include "gfbeam/experiment.hpp"

#include "test_util.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace gfbeam;
using namespace gfbeam::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{
    struct Run
    {
        int code = -1;
        std::string out, err;
    };

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    Run run_cli(const std::string &args, const fs::path &dir)
    {
        const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
        const std::string cmd = std::string(GFBEAM_CLI) + " " + args + " >" + o.string() + " 2>" + e.string();
        const int status = std::system(cmd.c_str());
        Run r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(o);
        r.err = slurp(e);
        return r;
    }

    // Small desk-scale config written next to the outputs.
    fs::path tiny_config(const fs::path &dir, int epochs = 4, int samples = 150,
                         const std::function<void(json &)> &edit = {})
    {
        json j = to_json(ExperimentConfig{});
        j["scenario"] = to_json(two_cluster_scenario());
        j["dataset"]["num_samples"] = samples;
        j["gf"]["n_probe"] = 4;
        j["gf"]["hidden_width"] = 16;
        j["cb"] = j["gf"];
        j["codebook"] = {{"tx_q_y", 2}, {"tx_q_z", 1}, {"rx_q_y", 2}, {"rx_q_z", 1}, {"topk", 3}};
        j["train"]["epochs"] = epochs;
        j["train"]["batch_size"] = 32;
        j["train"]["log_every"] = 1;
        if (edit)
            edit(j);
        const auto p = dir / "config.json";
        std::ofstream(p) << j.dump(2);
        return p;
    }

    std::vector<std::vector<std::string>> read_csv(const fs::path &p)
    {
        std::vector<std::vector<std::string>> rows;
        std::ifstream in(p);
        std::string line;
        while (std::getline(in, line))
        {
            std::vector<std::string> f(1);
            for (char c : line)
                if (c == ',')
                    f.emplace_back();
                else
                    f.back().push_back(c);
            rows.push_back(f);
        }
        return rows;
    }

    json manifest(const fs::path &dir) { return json::parse(slurp(dir / "manifest.json")); }
}

TEST_CASE("cli gen - seeded output is reproducible and recorded in the manifest")
{
    const auto dir = temp_dir("cli_gen");
    const auto cfg = tiny_config(dir);
    const auto a = run_cli("gen --config " + cfg.string() + " --out " + (dir / "a").string() + " --seed 7", dir);
    REQUIRE(a.code == 0);
    CHECK(a.out.find("seed 7") != std::string::npos);
    CHECK(a.out.find("samples 150 (train 90, val 30, test 30)") != std::string::npos);
    const auto b = run_cli("gen --config " + cfg.string() + " --out " + (dir / "b").string() + " --seed 7", dir);
    REQUIRE(b.code == 0);
    CHECK(sha256_file(dir / "a" / "channels.bin") == sha256_file(dir / "b" / "channels.bin"));
    const auto c = run_cli("gen --config " + cfg.string() + " --out " + (dir / "c").string() + " --seed 8", dir);
    REQUIRE(c.code == 0);
    CHECK(sha256_file(dir / "a" / "channels.bin") != sha256_file(dir / "c" / "channels.bin"));

    const auto m = manifest(dir / "a");
    REQUIRE(m["runs"].size() == 1);
    CHECK(m["runs"][0]["seeds"]["root"] == 7);
    CHECK(m["runs"][0]["config_sha256"].get<std::string>().size() == 64);
    REQUIRE(m["files"].size() == 1);
    CHECK(m["files"][0]["name"] == "channels.bin");
    CHECK(m["files"][0]["sha256"] == sha256_file(dir / "a" / "channels.bin"));

    const auto ds = load_dataset(dir / "a" / "channels.bin");
    CHECK(ds.size() == 150);
}

TEST_CASE("cli - configuration problems exit with code 2")
{
    const auto dir = temp_dir("cli_errors");
    const auto cfg = tiny_config(dir);
    CHECK(run_cli("gen --config " + cfg.string() + " --out " + (dir / "o").string() + " --samples 0", dir).code == 2);
    CHECK(run_cli("", dir).code == 2);
    CHECK(run_cli("frobnicate", dir).code == 2);
    CHECK(run_cli("train xx --config " + cfg.string() + " --data a --out b", dir).code == 2);
    CHECK(run_cli("train gf --config " + cfg.string() + " --data " + (dir / "none.bin").string() + " --out " +
                     (dir / "o").string(),
                 dir)
              .code == 2);
    std::ofstream(dir / "unknown.json") << R"({"gf": {"n_probe": 4, "colour": "red"}})";
    const auto r = run_cli("gen --config " + (dir / "unknown.json").string() + " --out " + (dir / "o").string(), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("gf.colour") != std::string::npos);
    CHECK(run_cli("sweep --config " + cfg.string() + " --axis speed --out " + (dir / "o").string(), dir).code == 2);
    CHECK(run_cli("--help", dir).code == 0);
}

TEST_CASE("cli train/eval - history rows, model round trip, baseline-only evaluation")
{
    const auto dir = temp_dir("cli_train");
    const auto cfg = tiny_config(dir, 4, 200);
    const std::string data = (dir / "d" / "channels.bin").string();
    REQUIRE(run_cli("gen --config " + cfg.string() + " --out " + (dir / "d").string(), dir).code == 0);

    const auto t = run_cli("train gf --config " + cfg.string() + " --data " + data + " --out " + (dir / "m").string(), dir);
    REQUIRE(t.code == 0);
    CHECK(t.err.find("epoch 4") != std::string::npos);
    CHECK(read_csv(dir / "m" / "gf_history.csv").size() == 5);
    const GfModel gf = load_gf_model(dir / "m" / "gf_model.bin");
    CHECK(gf.config.n_probe == 4);
    REQUIRE(run_cli("train cb --config " + cfg.string() + " --data " + data + " --out " + (dir / "m").string() + " -q",
                   dir)
                .code == 0);
    CHECK(read_csv(dir / "m" / "cb_history.csv").size() == 5);
    CHECK(manifest(dir / "m")["runs"].size() == 2);

    // baseline-only: no model files needed
    const auto b = run_cli("eval --config " + cfg.string() + " --data " + data + " --out " + (dir / "b").string() +
                              " --methods genie,exhaustive,dft_egc,mrt_mrc",
                          dir);
    REQUIRE(b.code == 0);
    const auto recs = read_csv(dir / "b" / "records.csv");
    REQUIRE(recs.size() == 1 + 4 * 40);
    std::map<std::string, std::map<std::string, double>> snr;
    for (std::size_t i = 1; i < recs.size(); ++i)
        snr[recs[i][7]][recs[i][0]] = std::stod(recs[i][8]);
    for (const auto &[id, m] : snr)
    {
        CHECK(m.at("mrt_mrc") >= m.at("dft_egc") - 1e-7);
        CHECK(m.at("dft_egc") >= m.at("genie") - 1e-7);
        CHECK(m.at("genie") >= m.at("exhaustive") - 1e-7);
    }

    CHECK(run_cli("eval --config " + cfg.string() + " --data " + data + " --out " + (dir / "x").string() +
                     " --methods dl_gf",
                 dir)
              .code == 2);

    // full evaluation is reproducible
    const std::string full = "eval --config " + cfg.string() + " --data " + data + " --gf-model " +
                             (dir / "m" / "gf_model.bin").string() + " --cb-model " +
                             (dir / "m" / "cb_model.bin").string() + " --out ";
    REQUIRE(run_cli(full + (dir / "e1").string(), dir).code == 0);
    REQUIRE(run_cli(full + (dir / "e2").string(), dir).code == 0);
    CHECK(slurp(dir / "e1" / "summary.csv") == slurp(dir / "e2" / "summary.csv"));
    CHECK(read_csv(dir / "e1" / "records.csv").size() == 1 + 7 * 40);
    CHECK(fs::exists(dir / "e1" / "speed.csv"));
}

TEST_CASE("cli train - diverging training exits with code 3 and names the epoch")
{
    const auto dir = temp_dir("cli_nan");
    const auto cfg = tiny_config(dir, 2, 60, [](json &j) {
        j["train"]["lr"] = 1e300;
        j["train"]["batch_size"] = 8;
    });
    REQUIRE(run_cli("gen --config " + cfg.string() + " --out " + (dir / "d").string(), dir).code == 0);
    const auto r = run_cli("train gf --config " + cfg.string() + " --data " + (dir / "d" / "channels.bin").string() +
                               " --out " + (dir / "o").string(),
                           dir);
    CHECK(r.code == 3);
    CHECK(r.err.find("epoch 1") != std::string::npos);
}

TEST_CASE("cli sweep - one summary block per grid point")
{
    const auto dir = temp_dir("cli_sweep");
    const auto cfg = tiny_config(dir, 2, 100, [](json &j) { j["eval"]["methods"] = {"dl_gf", "genie"}; });
    const auto r = run_cli("sweep --config " + cfg.string() + " --axis gamma --grid 0.3,1.0 --jobs 2 -q --out " +
                              (dir / "s").string(),
                          dir);
    REQUIRE(r.code == 0);
    const auto rows = read_csv(dir / "s" / "sweep_summary.csv");
    REQUIRE(rows.size() == 1 + 4);
    int gf_rows = 0;
    std::vector<std::string> gammas;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i][0] == "dl_gf")
        {
            ++gf_rows;
            gammas.push_back(rows[i][2]);
        }
    CHECK(gf_rows == 2);
    CHECK(gammas == std::vector<std::string>{"0.3", "1"});
    CHECK(fs::exists(dir / "s" / "point_00_gamma_0.3" / "gf_model.bin"));
    CHECK(fs::exists(dir / "s" / "point_01_gamma_1.0" / "gf_history.csv"));

    // nmse axis leaves the evaluation split clean: genie rows agree across points
    const auto n = run_cli("sweep --config " + cfg.string() + " --axis nmse --grid -inf,0 -q --out " +
                              (dir / "n").string(),
                          dir);
    REQUIRE(n.code == 0);
    std::vector<std::string> genie_means;
    for (const auto &row : read_csv(dir / "n" / "sweep_summary.csv"))
        if (row[0] == "genie")
            genie_means.push_back(row[12]);
    REQUIRE(genie_means.size() == 2);
    CHECK(genie_means[0] == genie_means[1]);
}

TEST_CASE("cli patterns - probing and synthesized exports")
{
    const auto dir = temp_dir("cli_patterns");
    const auto cfg = tiny_config(dir, 1, 60);
    const std::string data = (dir / "d" / "channels.bin").string();
    REQUIRE(run_cli("gen --config " + cfg.string() + " --out " + (dir / "d").string(), dir).code == 0);
    REQUIRE(run_cli("train gf -q --config " + cfg.string() + " --data " + data + " --out " + (dir / "m").string(), dir)
                .code == 0);
    const std::string model = (dir / "m" / "gf_model.bin").string();

    REQUIRE(run_cli("patterns --config " + cfg.string() + " --model " + model + " --points 91 --out " +
                       (dir / "p").string(),
                   dir)
                .code == 0);
    int csvs = 0;
    for (const auto &e : fs::directory_iterator(dir / "p"))
        csvs += e.path().extension() == ".csv" ? 1 : 0;
    CHECK(csvs == 8);
    const auto rows = read_csv(dir / "p" / "probe_tx_0.csv");
    CHECK(rows.size() == 92);
    CHECK(rows[0] == std::vector<std::string>{"az_rad", "gain_db"});

    CHECK(run_cli("patterns --config " + cfg.string() + " --model " + model + " --beams synthesized --out " +
                     (dir / "q").string(),
                 dir)
              .code == 2);
    REQUIRE(run_cli("patterns --config " + cfg.string() + " --model " + model +
                       " --beams synthesized --sample-id 5 --data " + data + " --out " + (dir / "q").string(),
                   dir)
                .code == 0);
    CHECK(fs::exists(dir / "q" / "synth_tx.csv"));
    CHECK(fs::exists(dir / "q" / "synth_rx.csv"));
}

TEST_CASE("cli overhead - reference values and K monotonicity")
{
    const auto dir = temp_dir("cli_overhead");
    const auto r = run_cli("overhead --n-probe 32 --m-t 256 --m-r 64 --n-f 8 --n-w 8 --k-values 1,2,5,10,20,50 --out " +
                              (dir / "o").string(),
                          dir);
    REQUIRE(r.code == 0);
    const auto rows = read_csv(dir / "o" / "overhead.csv");
    std::map<std::string, std::vector<long long>> by;
    std::map<std::pair<std::string, int>, long long> at;
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        by[rows[i][0]].push_back(std::stoll(rows[i][8]));
        at[{rows[i][0], std::stoi(rows[i][1])}] = std::stoll(rows[i][8]);
    }
    CHECK(at.at({"dl_gf", 20}) == 32);
    CHECK(at.at({"exhaustive", 1}) == 16384);
    CHECK(at.at({"hierarchical", 20}) == 336);
    for (const auto &[m, v] : by)
        CHECK(std::is_sorted(v.begin(), v.end()));
    for (long long v : by.at("dl_gf"))
        CHECK(v == 32);
    CHECK(r.out.find("16384") != std::string::npos);
}
