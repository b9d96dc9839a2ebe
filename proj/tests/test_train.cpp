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

#include "gfbeam/evaluate.hpp"
#include "gfbeam/train.hpp"

#include "test_util.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

using namespace gfbeam;
using namespace gfbeam::testing;

namespace
{
    LinkBudget table_budget() { return LinkBudget{}; }

    // Single path, fixed geometry, no UE rotation.
    ScenarioConfig single_path_scenario(double spread)
    {
        ScenarioConfig sc;
        sc.tx_array = {4, 4, 0.5};
        sc.rx_array = {2, 2, 0.5};
        sc.num_paths = 1;
        sc.clusters = {Cluster{0.5, 1.3, -0.7, 1.9, spread, -105.0, 0.0}};
        sc.rotation_ranges = {Interval{0, 0}, Interval{0, 0}, Interval{0, 0}};
        return sc;
    }

    Dataset make_data(const ScenarioConfig &sc, std::size_t n, std::uint64_t seed)
    {
        return split_dataset(generate_scenario(sc, n, seed), SplitFractions{0.6, 0.2, 0.2}, seed + 1);
    }

    GfConfig small_gf(int n_probe)
    {
        GfConfig c;
        c.n_probe = n_probe;
        c.hidden_width = 32;
        return c;
    }

    bool same_params(const diff::ParamBlock &a, const diff::ParamBlock &b)
    {
        if (a.size() != b.size())
            return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a.names()[i] != b.names()[i] || a.at(i).rows() != b.at(i).rows() || a.at(i).cols() != b.at(i).cols() ||
                std::memcmp(a.at(i).data(), b.at(i).data(), sizeof(double) * static_cast<std::size_t>(a.at(i).size())) != 0)
                return false;
        return true;
    }

    double mean_of(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }
}

TEST_CASE("Adam - first step moves each entry by lr against the gradient sign")
{
    diff::ParamBlock p;
    diff::Tensor x(2, 2);
    x << 1.0, -2.0, 0.5, 3.0;
    p.add("x", x);
    diff::Tensor g(2, 2);
    g << 0.3, -4.0, 1e-3, -7.0;

    AdamState st;
    st.lr = 0.01;
    adam_step(st, p, {g});
    for (Eigen::Index i = 0; i < 4; ++i)
    {
        const double expected = x.data()[i] - 0.01 * (g.data()[i] > 0 ? 1.0 : -1.0);
        CHECK(p["x"].data()[i] == Catch::Approx(expected).margin(1e-6));
    }
    CHECK(st.step == 1);
}

TEST_CASE("Adam - zero gradient leaves parameters unchanged")
{
    diff::ParamBlock p;
    p.add("a", diff::Tensor::Constant(3, 1, 0.25));
    AdamState st;
    for (int i = 0; i < 5; ++i)
        adam_step(st, p, {diff::Tensor::Zero(3, 1)});
    CHECK((p["a"].array() == 0.25).all());
}

TEST_CASE("Adam - matches a scalar reference recursion and minimizes x^2")
{
    diff::ParamBlock p;
    p.add("x", diff::Tensor::Constant(1, 1, 1.0));
    AdamState st;
    st.lr = 0.1;

    double x = 1.0, m = 0.0, v = 0.0;
    bool reached = false;
    for (int t = 1; t <= 50; ++t)
    {
        const double g = 2.0 * p["x"](0, 0);
        adam_step(st, p, {diff::Tensor::Constant(1, 1, g)});

        const double gr = 2.0 * x;
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
        x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);

        REQUIRE(p["x"](0, 0) == Catch::Approx(x).epsilon(1e-12).margin(1e-14));
        reached = reached || std::abs(x) < 0.2;
    }
    CHECK(reached);
}

TEST_CASE("Adam - gradient count mismatch is rejected")
{
    diff::ParamBlock p;
    p.add("a", diff::Tensor::Zero(1, 1));
    AdamState st;
    CHECK_THROWS_AS(adam_step(st, p, {}), ConfigError);
}

TEST_CASE("TrainConfig validation")
{
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("train_gf - identical seeds give bitwise identical models")
{
    const auto ds = make_data(two_cluster_scenario(), 120, 5);
    TrainConfig tr;
    tr.epochs = 3;
    tr.batch_size = 32;
    tr.lr = 3e-3;
    tr.seed = 9;

    const auto a = train_gf(ds, table_budget(), small_gf(4), tr);
    const auto b = train_gf(ds, table_budget(), small_gf(4), tr);
    CHECK(same_params(a.model.params, b.model.params));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i)
        CHECK(a.history[i].train_utility == b.history[i].train_utility);

    tr.seed = 10;
    const auto c = train_gf(ds, table_budget(), small_gf(4), tr);
    CHECK_FALSE(same_params(a.model.params, c.model.params));
}

TEST_CASE("train_gf - single-path scenario reaches a near-optimal normalized gain")
{
    const auto ds = make_data(single_path_scenario(0.1), 500, 21);
    auto gf = small_gf(4);
    gf.hidden_width = 64;
    TrainConfig tr;
    tr.epochs = 120;
    tr.batch_size = 64;
    tr.lr = 3e-3;
    tr.seed = 3;

    const auto r = train_gf(ds, table_budget(), gf, tr);
    const auto val = ds.subset(Split::val);
    const auto pred = predict_gf(r.model, val, table_budget(), 77, true);
    const double g = mean_of(pred.norm_gain);
    INFO("mean normalized gain " << g);
    CHECK(g >= 0.9);

    // synthesized and probing beams stay on the unit-modulus set
    for (Eigen::Index i = 0; i < pred.v_t.rows(); ++i)
    {
        CHECK(is_unit_modulus(pred.v_t.row(i).transpose()));
        CHECK(is_unit_modulus(pred.v_r.row(i).transpose()));
    }
    const CMatrix f = r.model.probing_tx(), w = r.model.probing_rx();
    for (Eigen::Index k = 0; k < f.cols(); ++k)
    {
        CHECK(is_unit_modulus(f.col(k)));
        CHECK(is_unit_modulus(w.col(k)));
    }
}

TEST_CASE("train_gf - training utility increases")
{
    const auto ds = make_data(two_cluster_scenario(), 400, 31);
    TrainConfig tr;
    tr.epochs = 40;
    tr.batch_size = 64;
    tr.lr = 3e-3;
    const auto r = train_gf(ds, table_budget(), small_gf(4), tr);
    REQUIRE(r.history.size() == 40);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i)
    {
        first += r.history[static_cast<std::size_t>(i)].train_utility;
        last += r.history[r.history.size() - 1 - static_cast<std::size_t>(i)].train_utility;
    }
    CHECK(last > first);
}

TEST_CASE("train_gf - returned checkpoint is the best validation epoch")
{
    const auto ds = make_data(two_cluster_scenario(), 200, 41);
    TrainConfig tr;
    tr.epochs = 12;
    tr.batch_size = 32;
    tr.lr = 1e-2;
    tr.seed = 4;
    const auto gf = small_gf(4);
    const auto r = train_gf(ds, table_budget(), gf, tr);

    REQUIRE(r.best_epoch >= 1);
    double best = -INFINITY;
    for (const auto &h : r.history)
        best = std::max(best, h.val_avg_snr_db);
    CHECK(r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_avg_snr_db == best);

    const auto pred = predict_gf(r.model, ds.subset(Split::val), table_budget(), validation_noise_seed(tr),
                                 gf.include_measurement_noise);
    CHECK(mean_of(pred.snr_db) == Catch::Approx(best).epsilon(1e-12));
}

TEST_CASE("train_gf - progress callback and history CSV")
{
    const auto ds = make_data(two_cluster_scenario(), 60, 51);
    TrainConfig tr;
    tr.epochs = 5;
    tr.batch_size = 16;
    tr.log_every = 2;
    std::vector<int> seen;
    const auto r = train_gf(ds, table_budget(), small_gf(2), tr, [&](const HistoryRow &h) { seen.push_back(h.epoch); });
    CHECK(seen == std::vector<int>{2, 4, 5});

    const auto dir = temp_dir("history");
    write_history_csv(dir / "h.csv", r.history);
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_utility,val_ubf,val_avg_snr_db,val_misdetection");
    int rows = 0;
    while (std::getline(in, line))
    {
        ++rows;
        CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
    }
    CHECK(rows == 5);
}

TEST_CASE("train_gf - empty train split is a configuration error")
{
    auto ds = generate_scenario(two_cluster_scenario(), 20, 1);
    ds.split.assign(ds.size(), Split::test);
    CHECK_THROWS_AS(train_gf(ds, table_budget(), small_gf(2), TrainConfig{}), ConfigError);
}

TEST_CASE("train_gf - non-finite channels raise a numerical error naming the epoch")
{
    auto ds = make_data(two_cluster_scenario(), 40, 61);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.split[i] == Split::train)
        {
            ds.samples[i].h(0, 0) = cplx(NAN, 0.0);
            break;
        }
    auto gf = small_gf(2);
    gf.feature_scale = FeatureScale::linear;
    TrainConfig tr;
    tr.epochs = 2;
    tr.batch_size = 64;
    try
    {
        train_gf(ds, table_budget(), gf, tr);
        FAIL("expected NumericalError");
    }
    catch (const NumericalError &e)
    {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
}

TEST_CASE("label_dataset - matches a double loop over the codebooks")
{
    const auto ds = generate_scenario(two_cluster_scenario(), 30, 71);
    const auto cb_t = dft_codebook({4, 4, 0.5}, 2, 1);
    const auto cb_r = dft_codebook({2, 2, 0.5}, 2, 1);
    const auto labels = label_dataset(ds, cb_t, cb_r);
    REQUIRE(labels.tx.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        const auto &h = ds.samples[i].h;
        int bt = 0, br = 0;
        double best = -1.0;
        for (Eigen::Index t = 0; t < cb_t.size(); ++t)
            for (Eigen::Index r = 0; r < cb_r.size(); ++r)
            {
                cplx acc = 0.0;
                for (Eigen::Index a = 0; a < h.rows(); ++a)
                    for (Eigen::Index b = 0; b < h.cols(); ++b)
                        acc += std::conj(cb_r.beams(a, r)) * h(a, b) * cb_t.beams(b, t);
                if (std::norm(acc) > best)
                {
                    best = std::norm(acc);
                    bt = static_cast<int>(t);
                    br = static_cast<int>(r);
                }
            }
        CHECK(labels.tx[i] == bt);
        CHECK(labels.rx[i] == br);
    }

    auto scaled = ds;
    for (auto &s : scaled.samples)
        s.h *= cplx(0.0, 37.5);
    const auto l2 = label_dataset(scaled, cb_t, cb_r);
    CHECK(l2.tx == labels.tx);
    CHECK(l2.rx == labels.rx);
}

TEST_CASE("train_cb - deterministic, cross-entropy decreases, single label is learned")
{
    const auto ds = make_data(single_path_scenario(0.0), 200, 81);
    const auto cb_t = dft_codebook({4, 4, 0.5}, 2, 1);
    const auto cb_r = dft_codebook({2, 2, 0.5}, 2, 1);
    const auto labels = label_dataset(ds, cb_t, cb_r);
    // zero angular spread: one pair is optimal for every sample
    for (std::size_t i = 1; i < ds.size(); ++i)
        REQUIRE((labels.tx[i] == labels.tx[0] && labels.rx[i] == labels.rx[0]));

    auto cfg = small_gf(2);
    TrainConfig tr;
    tr.epochs = 30;
    tr.batch_size = 32;
    tr.lr = 1e-2;
    const auto a = train_cb(ds, table_budget(), cfg, tr, cb_t, cb_r, labels);
    const auto b = train_cb(ds, table_budget(), cfg, tr, cb_t, cb_r, labels);
    CHECK(same_params(a.model.params, b.model.params));
    CHECK(a.history.back().train_utility > a.history.front().train_utility);

    const auto test = ds.subset(Split::test);
    const auto pred = predict_cb(a.model, test, table_budget(), 5, true);
    int correct = 0;
    for (Eigen::Index i = 0; i < pred.logits_t.rows(); ++i)
    {
        Eigen::Index t = 0, r = 0;
        pred.logits_t.row(i).maxCoeff(&t);
        pred.logits_r.row(i).maxCoeff(&r);
        correct += (t == labels.tx[0] && r == labels.rx[0]) ? 1 : 0;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.99);
}

TEST_CASE("train_cb - label count and codebook size mismatches are rejected")
{
    const auto ds = make_data(two_cluster_scenario(), 20, 91);
    const auto cb_t = dft_codebook({4, 4, 0.5}, 2, 1);
    const auto cb_r = dft_codebook({2, 2, 0.5}, 2, 1);
    auto labels = label_dataset(ds, cb_t, cb_r);
    TrainConfig tr;
    tr.epochs = 1;
    auto short_labels = labels;
    short_labels.tx.pop_back();
    short_labels.rx.pop_back();
    CHECK_THROWS_AS(train_cb(ds, table_budget(), small_gf(2), tr, cb_t, cb_r, short_labels), ConfigError);
    const auto wrong = dft_codebook({2, 2, 0.5}, 2, 1);
    CHECK_THROWS_AS(train_cb(ds, table_budget(), small_gf(2), tr, wrong, cb_r, labels), ConfigError);
}
