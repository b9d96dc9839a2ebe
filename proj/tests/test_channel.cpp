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
#include "test_util.hpp"

#include "gfbeam/channel.hpp"

#include <cmath>
#include <fstream>

using namespace gfbeam;
using Catch::Matchers::WithinAbs;

namespace
{
    Eigen::Matrix3d rz(double a)
    {
        Eigen::Matrix3d m;
        m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
        return m;
    }
    Eigen::Matrix3d ry(double a)
    {
        Eigen::Matrix3d m;
        m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
        return m;
    }
    Eigen::Matrix3d rx(double a)
    {
        Eigen::Matrix3d m;
        m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
        return m;
    }

    Eigen::Vector3d unit(double az, double el)
    {
        return {std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el)};
    }

    ScenarioConfig degenerate()
    {
        ScenarioConfig sc;
        sc.tx_array = {2, 2, 0.5};
        sc.rx_array = {2, 1, 0.5};
        sc.num_paths = 1;
        sc.clusters = {Cluster{0.3, 1.2, -0.4, 1.6, 0.0, -90.0, 0.0}};
        sc.rotation_ranges = {Interval{0, 0}, Interval{0, 0}, Interval{0, 0}};
        return sc;
    }
}

TEST_CASE("UPA response examples", "[channel]")
{
    const auto a = upa_response({2, 1, 0.5}, 0.0, kPi / 2);
    CHECK(std::abs(a(0) - cplx(1, 0)) < 1e-12);
    CHECK(std::abs(a(1) - cplx(1, 0)) < 1e-12);

    const auto b = upa_response({2, 1, 0.5}, kPi / 2, kPi / 2);
    CHECK(std::abs(b(1) - cplx(-1, 0)) < 1e-12);

    const auto c = upa_response({2, 2, 0.5}, kPi / 2, kPi / 2);
    const cplx want[] = {1.0, -1.0, 1.0, -1.0};
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(c(i) - want[i]) < 1e-12);
}

TEST_CASE("UPA entries have unit magnitude", "[channel][property]")
{
    Rng rng = make_rng(3, {});
    for (int t = 0; t < 200; ++t)
    {
        const ArrayConfig cfg{1 + static_cast<int>(uniform(rng, 0, 8)), 1 + static_cast<int>(uniform(rng, 0, 8)),
                              uniform(rng, 0.1, 1.0)};
        const auto a = upa_response(cfg, uniform(rng, -kPi, kPi), uniform(rng, 0, kPi));
        REQUIRE(a.size() == cfg.size());
        for (Eigen::Index i = 0; i < a.size(); ++i)
            REQUIRE_THAT(std::abs(a(i)), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("apply_orientation examples", "[channel]")
{
    const auto id = apply_orientation({}, 0.7, 1.1);
    CHECK_THAT(id.az, WithinAbs(0.7, 1e-12));
    CHECK_THAT(id.el, WithinAbs(1.1, 1e-12));

    const auto d = apply_orientation({kPi / 2, 0, 0}, 0.0, kPi / 2);
    CHECK_THAT(d.az, WithinAbs(-kPi / 2, 1e-12));
    CHECK_THAT(d.el, WithinAbs(kPi / 2, 1e-12));
}

TEST_CASE("apply_orientation matches an explicit matrix product", "[channel]")
{
    const Orientation o{0.3, 0.2, 0.1};
    const Eigen::Matrix3d r = rz(0.3) * ry(0.2) * rx(0.1);
    CHECK((rotation_matrix(o) - r).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::Vector3d v = r.transpose() * unit(0.5, 1.0);
    const auto d = apply_orientation(o, 0.5, 1.0);
    CHECK_THAT(d.el, WithinAbs(std::acos(v.z()), 1e-12));
    CHECK_THAT(d.az, WithinAbs(std::atan2(v.y(), v.x()), 1e-12));
}

TEST_CASE("apply_orientation preserves norm and is inverted by R", "[channel][property]")
{
    Rng rng = make_rng(5, {});
    for (int t = 0; t < 500; ++t)
    {
        const Orientation o{uniform(rng, -kPi, kPi), uniform(rng, -kPi / 2, kPi / 2), uniform(rng, -kPi / 2, kPi / 2)};
        const double az = uniform(rng, -kPi, kPi), el = uniform(rng, 0.01, kPi - 0.01);
        const auto d = apply_orientation(o, az, el);
        const Eigen::Vector3d u = unit(d.az, d.el);
        REQUIRE_THAT(u.norm(), WithinAbs(1.0, 1e-12));
        REQUIRE((rotation_matrix(o) * u - unit(az, el)).norm() < 1e-12);
        REQUIRE(d.az > -kPi);
        REQUIRE(d.az <= kPi);
    }
}

TEST_CASE("apply_orientation gimbal case gives zero azimuth", "[channel]")
{
    const auto d = apply_orientation({0.4, 0, 0}, 1.0, 0.0);
    CHECK(d.az == 0.0);
    CHECK_THAT(d.el, WithinAbs(0.0, 1e-12));
}

TEST_CASE("synthesize_channel examples", "[channel]")
{
    PathParams p;
    p.gain = 1.0;
    p.aod_el = p.aoa_el = kPi / 2;
    const std::vector<PathParams> one{p};
    const auto h = synthesize_channel(one, {1, 1, 0.5}, {1, 1, 0.5}, 100e6);
    CHECK(std::abs(h(0, 0) - cplx(1, 0)) < 1e-12);

    p.gain = 0.37;
    p.aod_az = 0.4;
    p.aoa_az = -1.1;
    const std::vector<PathParams> two{p};
    const auto h2 = synthesize_channel(two, {4, 2, 0.5}, {2, 2, 0.5}, 100e6);
    CHECK_THAT(h2.norm(), WithinAbs(0.37 * std::sqrt(8.0 * 4.0), 1e-12));
    Eigen::JacobiSVD<CMatrix> svd(h2);
    CHECK(svd.singularValues()(1) <= 1e-9 * svd.singularValues()(0));
}

TEST_CASE("synthesize_channel matches a double-loop sum", "[channel]")
{
    std::vector<PathParams> paths(2);
    paths[0] = {0.8, 0.3, 2e-9, 0.2, 1.3, -0.7, 1.9};
    paths[1] = {0.5, -1.2, 7e-9, -2.0, 0.6, 1.1, 1.0};
    const ArrayConfig tx{2, 2, 0.5}, rx{2, 1, 0.5};
    const double bw = 100e6;
    const auto h = synthesize_channel(paths, tx, rx, bw);

    auto steer = [](const ArrayConfig &a, int idx, double az, double el) {
        const int iy = idx % a.n_y, iz = idx / a.n_y;
        const double ph = 2 * kPi * a.spacing * (iy * std::sin(az) * std::sin(el) + iz * std::cos(el));
        return cplx(std::cos(ph), std::sin(ph));
    };
    for (int r = 0; r < rx.size(); ++r)
        for (int t = 0; t < tx.size(); ++t)
        {
            cplx acc = 0;
            for (const auto &p : paths)
            {
                const double ph = p.doppler_phase - 2 * kPi * p.delay * bw;
                acc += p.gain * cplx(std::cos(ph), std::sin(ph)) * steer(rx, r, p.aoa_az, p.aoa_el) *
                       std::conj(steer(tx, t, p.aod_az, p.aod_el));
            }
            CHECK(std::abs(h(r, t) - acc) < 1e-12);
        }
}

TEST_CASE("synthesize_channel is linear in the path gains", "[channel][property]")
{
    auto ds = generate_scenario(testing::two_cluster_scenario(), 20, 9);
    for (auto &s : ds.samples)
    {
        auto paths = s.paths;
        for (auto &p : paths)
            p.gain *= 2.0;
        const auto h2 = synthesize_channel(paths, {4, 4, 0.5}, {2, 2, 0.5}, 100e6);
        REQUIRE((h2 - 2.0 * s.h).cwiseAbs().maxCoeff() <= 1e-12 * h2.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("generate_scenario degenerate case", "[channel]")
{
    const auto ds = generate_scenario(degenerate(), 10, 4);
    REQUIRE(ds.size() == 10);
    const CMatrix ref = ds.samples[0].h.cwiseAbs().cast<cplx>();
    for (const auto &s : ds.samples)
    {
        Eigen::JacobiSVD<CMatrix> svd(s.h);
        CHECK(svd.singularValues()(1) <= 1e-9 * svd.singularValues()(0));
        CHECK((s.h.cwiseAbs().cast<cplx>() - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("generate_scenario is deterministic", "[channel]")
{
    const auto a = generate_scenario(testing::two_cluster_scenario(), 50, 17);
    const auto b = generate_scenario(testing::two_cluster_scenario(), 50, 17);
    const auto c = generate_scenario(testing::two_cluster_scenario(), 50, 18);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        REQUIRE(a.samples[i].h == b.samples[i].h);
        REQUIRE(a.samples[i].orientation == b.samples[i].orientation);
        differs = differs || a.samples[i].h != c.samples[i].h;
    }
    CHECK(differs);
}

TEST_CASE("generate_scenario AoD histogram concentrates on the cluster centers", "[channel]")
{
    auto sc = testing::two_cluster_scenario();
    sc.num_paths = 1;
    const auto ds = generate_scenario(sc, 10000, 23);
    int near_a = 0, near_b = 0, outside = 0;
    for (const auto &s : ds.samples)
    {
        const double az = s.paths[0].aod_az;
        if (std::abs(az - 0.6) <= 0.15 + 1e-12)
            ++near_a;
        else if (std::abs(az + 0.9) <= 0.15 + 1e-12)
            ++near_b;
        else
            ++outside;
    }
    CHECK(outside == 0);
    // binomial(10000, 1/2): 5 sigma = 250
    CHECK(std::abs(near_a - 5000) < 250);
    CHECK(std::abs(near_b - 5000) < 250);
}

TEST_CASE("generate_scenario validation", "[channel]")
{
    auto sc = testing::two_cluster_scenario();
    CHECK_THROWS_AS(generate_scenario(sc, 0, 1), ConfigError);
    sc.clusters.clear();
    CHECK_THROWS_AS(generate_scenario(sc, 5, 1), ConfigError);
    sc = testing::two_cluster_scenario();
    sc.bandwidth_hz = 0;
    CHECK_THROWS_AS(generate_scenario(sc, 5, 1), ConfigError);
    sc = testing::two_cluster_scenario();
    sc.clusters[0].angular_spread = -0.1;
    CHECK_THROWS_AS(generate_scenario(sc, 5, 1), ConfigError);
}

TEST_CASE("split_dataset sizes and determinism", "[channel]")
{
    const auto ds = generate_scenario(degenerate(), 101, 1);
    const auto a = split_dataset(ds, {}, 7);
    const auto b = split_dataset(ds, {}, 7);
    CHECK(a.split == b.split);
    CHECK(std::abs(static_cast<double>(a.indices(Split::train).size()) - 60.6) <= 1.0);
    CHECK(std::abs(static_cast<double>(a.indices(Split::val).size()) - 20.2) <= 1.0);
    CHECK(std::abs(static_cast<double>(a.indices(Split::test).size()) - 20.2) <= 1.0);
    CHECK(a.indices(Split::train).size() + a.indices(Split::val).size() + a.indices(Split::test).size() == 101);

    const auto c = split_dataset(generate_scenario(degenerate(), 100, 1), {}, 7);
    CHECK(c.indices(Split::train).size() == 60);
    CHECK(c.indices(Split::val).size() == 20);
    CHECK(c.indices(Split::test).size() == 20);

    CHECK_THROWS_AS(split_dataset(generate_scenario(degenerate(), 4, 1), {}, 7), ConfigError);
    CHECK_THROWS_AS(split_dataset(ds, {0.5, 0.2, 0.2}, 7), ConfigError);
}

TEST_CASE("corrupt_dataset", "[channel]")
{
    const auto ds = split_dataset(generate_scenario(testing::two_cluster_scenario(), 10000, 2), {}, 3);

    const auto off = corrupt_dataset(ds, -INFINITY, 5);
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(off.samples[i].h == ds.samples[i].h);

    const auto c = corrupt_dataset(ds, 0.0, 5);
    double err = 0, sig = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        if (ds.split[i] == Split::train)
        {
            err += (c.samples[i].h - ds.samples[i].h).squaredNorm();
            sig += ds.samples[i].h.squaredNorm();
        }
        else
            REQUIRE(c.samples[i].h == ds.samples[i].h);
    }
    CHECK(err / sig >= 0.95);
    CHECK(err / sig <= 1.05);

    const auto d = corrupt_dataset(ds, -10.0, 6);
    const auto e = corrupt_dataset(ds, -10.0, 7);
    double ed = 0, ee = 0;
    bool differ = false;
    for (auto i : ds.indices(Split::train))
    {
        ed += (d.samples[i].h - ds.samples[i].h).squaredNorm();
        ee += (e.samples[i].h - ds.samples[i].h).squaredNorm();
        differ = differ || d.samples[i].h != e.samples[i].h;
    }
    CHECK(differ);
    CHECK(std::abs(ed / ee - 1.0) < 0.05);
    CHECK(std::abs(ed / sig - 0.1) < 0.005);
}

TEST_CASE("dataset file round trip", "[channel][io]")
{
    const auto dir = testing::temp_dir("chan_io");
    const auto ds = split_dataset(generate_scenario(testing::two_cluster_scenario(), 30, 2), {}, 3);
    save_dataset(ds, dir / "a.bin");
    const auto back = load_dataset(dir / "a.bin");
    REQUIRE(back.size() == ds.size());
    CHECK(back.split == ds.split);
    CHECK(back.seed == ds.seed);
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        const CMatrix want = ds.samples[i].h.cast<std::complex<float>>().cast<cplx>();
        REQUIRE(back.samples[i].h == want);
        REQUIRE(back.samples[i].orientation.rot_z == static_cast<double>(static_cast<float>(ds.samples[i].orientation.rot_z)));
    }

    // saving what was loaded reproduces the file byte for byte
    save_dataset(back, dir / "b.bin");
    std::ifstream fa(dir / "a.bin", std::ios::binary), fb(dir / "b.bin", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.rfind("BFCHAN1\n", 0) == 0);
}

TEST_CASE("dataset file errors", "[channel][io]")
{
    const auto dir = testing::temp_dir("chan_err");
    const auto ds = generate_scenario(testing::two_cluster_scenario(), 5, 2);
    save_dataset(ds, dir / "ok.bin");
    std::ifstream in(dir / "ok.bin", std::ios::binary);
    const std::string good((std::istreambuf_iterator<char>(in)), {});

    auto write = [&](const std::string &name, const std::string &data) {
        std::ofstream out(dir / name, std::ios::binary);
        out << data;
        return dir / name;
    };
    CHECK_THROWS_AS(load_dataset(write("empty.bin", "")), FormatError);
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(load_dataset(write("magic.bin", bad_magic)), FormatError);
    CHECK_THROWS_AS(load_dataset(write("trunc.bin", good.substr(0, good.size() - 7))), FormatError);
    CHECK_THROWS_AS(load_dataset(write("long.bin", good + "abcd")), FormatError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.bin"), ConfigError);
}
