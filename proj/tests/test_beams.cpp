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

#include "gfbeam/beams.hpp"

#include <cmath>
#include <fstream>

using namespace gfbeam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
    CVector vec(std::initializer_list<cplx> v)
    {
        CVector out(static_cast<Eigen::Index>(v.size()));
        Eigen::Index i = 0;
        for (auto x : v)
            out(i++) = x;
        return out;
    }

    CVector random_beam(Eigen::Index n, Rng &rng)
    {
        CVector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = std::polar(1.0 / std::sqrt(static_cast<double>(n)), uniform(rng, -kPi, kPi));
        return v;
    }

    const cplx J(0.0, 1.0);
}

TEST_CASE("DFT codebook small examples", "[beams]")
{
    const auto cb = dft_codebook({2, 1, 0.5}, 1, 1);
    REQUIRE(cb.size() == 2);
    const double s = 1 / std::sqrt(2.0);
    CHECK((cb.beam(0) - vec({s, s})).norm() < 1e-12);
    CHECK((cb.beam(1) - vec({s, -s})).norm() < 1e-12);

    const auto cb2 = dft_codebook({2, 1, 0.5}, 2, 1);
    REQUIRE(cb2.size() == 4);
    CHECK((cb2.beam(1) - vec({s, J * s})).norm() < 1e-12);
}

TEST_CASE("DFT codebook 8x8 with 2x oversampling", "[beams]")
{
    const auto cb = dft_codebook({8, 8, 0.5}, 2, 2);
    REQUIRE(cb.size() == 256);
    const CMatrix gram = cb.beams.adjoint() * cb.beams;
    for (Eigen::Index m = 0; m < cb.size(); ++m)
    {
        REQUIRE(is_unit_modulus(cb.beam(m)));
        REQUIRE(std::abs(gram(m, m) - 1.0) < 1e-12);
    }
}

TEST_CASE("DFT codebook column ordering and orthogonality", "[beams]")
{
    const ArrayConfig a{4, 2, 0.5};
    const auto cb = dft_codebook(a, 1, 1);
    REQUIRE(cb.size() == 8);
    const CMatrix gram = cb.beams.adjoint() * cb.beams;
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 8; ++j)
            if (i != j)
                REQUIRE(std::abs(gram(i, j)) <= 1e-9);

    // column m_z * (q_y n_y) + m_y is the Kronecker product (z (x) y) of 1D DFT vectors
    const auto q = dft_codebook(a, 2, 3);
    REQUIRE(q.size() == 2 * 4 * 3 * 2);
    const int my = 5, mz = 4;
    const CVector col = q.beam(mz * 8 + my);
    for (int iz = 0; iz < 2; ++iz)
        for (int iy = 0; iy < 4; ++iy)
        {
            const cplx want = std::polar(1 / std::sqrt(8.0), 2 * kPi * (iy * my / 8.0 + iz * mz / 6.0));
            REQUIRE(std::abs(col(iz * 4 + iy) - want) < 1e-12);
        }
    CHECK_THROWS_AS(dft_codebook(a, 0, 1), ConfigError);
}

TEST_CASE("bf_gain examples", "[beams]")
{
    const double s = 1 / std::sqrt(2.0);
    CHECK_THAT(bf_gain(CMatrix::Identity(2, 2), vec({s, s}), vec({s, s})), WithinAbs(1.0, 1e-12));

    const ArrayConfig tx{2, 2, 0.5}, rx{2, 1, 0.5};
    const CVector at = upa_response(tx, 0.4, 1.2), ar = upa_response(rx, -0.3, 1.7);
    const cplx alpha(0.3, -0.2);
    const CMatrix h = alpha * ar * at.adjoint();
    const double g = bf_gain(h, at / std::sqrt(4.0), ar / std::sqrt(2.0));
    CHECK_THAT(g, WithinRel(std::norm(alpha) * 8.0, 1e-12));
}

TEST_CASE("bf_gain matches a triple loop", "[beams]")
{
    Rng rng = make_rng(1, {});
    const CMatrix h = testing::random_cmatrix(4, 2, rng);
    const CVector f = testing::random_cvector(2, rng), w = testing::random_cvector(4, rng);
    cplx acc = 0;
    for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 2; ++t)
            acc += std::conj(w(r)) * h(r, t) * f(t);
    CHECK_THAT(bf_gain(h, f, w), WithinRel(std::norm(acc), 1e-12));
}

TEST_CASE("SNR conversions", "[beams]")
{
    const auto b1 = LinkBudget::from_watts(1.0, 1.0);
    const CMatrix h = CMatrix::Identity(1, 1);
    const CVector one = vec({1.0});
    CHECK_THAT(snr(h, one, one, b1).db, WithinAbs(0.0, 1e-12));
    CHECK_THAT(snr(std::sqrt(2.0) * h, one, one, b1).db, WithinAbs(3.0103, 1e-4));

    const LinkBudget table1;
    CHECK_THAT(table1.noise_power_w(), WithinRel(std::pow(10.0, -12.3), 1e-12)); // -93 dBm
    CHECK_THAT(table1.tx_power_w(), WithinRel(0.1, 1e-12));
    for (double gain : {1e-12, 3.7e-10, 2e-9})
        CHECK_THAT(snr_from_gain(gain, table1).db, WithinAbs(20.0 + 93.0 + 10 * std::log10(gain), 1e-9));

    LinkBudget bad;
    bad.bandwidth_hz = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("normalized_gain examples and bounds", "[beams]")
{
    const ArrayConfig tx{2, 2, 0.5}, rx{2, 1, 0.5};
    const CVector at = upa_response(tx, 0.4, 1.2), ar = upa_response(rx, -0.3, 1.7);
    const CMatrix h = ar * at.adjoint();
    CHECK_THAT(normalized_gain(h, at / 2.0, ar / std::sqrt(2.0)), WithinAbs(1.0, 1e-12));

    CVector ortho(2);
    ortho << ar(1), -ar(0);
    ortho = ortho.conjugate() / ortho.norm();
    CHECK_THAT(normalized_gain(h, at / 2.0, ortho), WithinAbs(0.0, 1e-12));

    Rng rng = make_rng(2, {});
    for (int t = 0; t < 200; ++t)
    {
        const CMatrix hr = testing::random_cmatrix(4, 8, rng);
        const double s = Eigen::JacobiSVD<CMatrix>(hr).singularValues()(0);
        const double g = normalized_gain(hr, random_beam(8, rng), random_beam(4, rng));
        REQUIRE(g >= 0.0);
        REQUIRE(g <= s * s / hr.squaredNorm() * (1 + 1e-12));
    }
    CHECK_THROWS_AS(normalized_gain(CMatrix::Zero(2, 2), vec({1, 0}), vec({1, 0})), ConfigError);
}

TEST_CASE("EGC combiner examples", "[beams]")
{
    // h f = [1, j]
    const CMatrix h = vec({1.0, J});
    const CVector f = vec({1.0});
    const auto w = egc_combiner(h, f);
    const double s = 1 / std::sqrt(2.0);
    CHECK((w - vec({s, J * s})).norm() < 1e-12);
    CHECK_THAT(bf_gain(h, f, w), WithinAbs(2.0, 1e-12));

    const CMatrix h2 = vec({0.5 * std::polar(1.0, 0.3), 2.0 * std::polar(1.0, 0.3), 1.5 * std::polar(1.0, 0.3)});
    CHECK_THAT(bf_gain(h2, f, egc_combiner(h2, f)), WithinRel(16.0 / 3.0, 1e-12));

    const CMatrix hz = vec({0.0, 1.0});
    const auto wz = egc_combiner(hz, f);
    CHECK(is_unit_modulus(wz));
    CHECK(std::abs(wz(0) - s) < 1e-15);
}

TEST_CASE("EGC beats every 8-level quantized combiner", "[beams]")
{
    Rng rng = make_rng(4, {});
    for (int trial = 0; trial < 20; ++trial)
    {
        const CMatrix h = testing::random_cmatrix(4, 1, rng);
        const CVector f = vec({1.0});
        const auto w = egc_combiner(h, f);
        REQUIRE(is_unit_modulus(w));
        const double g = bf_gain(h, f, w);
        double best = 0;
        for (int code = 0; code < 4096; ++code)
        {
            CVector q(4);
            for (int i = 0, c = code; i < 4; ++i, c /= 8)
                q(i) = std::polar(0.5, 2 * kPi * (c % 8) / 8.0);
            best = std::max(best, bf_gain(h, f, q));
        }
        REQUIRE(g >= best * (1 - 1e-12));
        double sum = h.cwiseAbs().sum();
        REQUIRE_THAT(g, WithinRel(sum * sum / 4.0, 1e-12));
    }
}

TEST_CASE("MRT/MRC examples", "[beams]")
{
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 1.0;
    CHECK_THAT(mrt_mrc(d).gain, WithinAbs(1.0, 1e-12));

    const CVector at = upa_response({2, 1, 0.5}, 0.4, 1.2), ar = upa_response({2, 1, 0.5}, -0.3, 1.7);
    const auto r = mrt_mrc(ar * at.adjoint());
    CHECK_THAT(r.gain, WithinRel(4.0, 1e-12));
    CHECK_THAT(r.f.norm(), WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.w.norm(), WithinAbs(1.0, 1e-12));
    CHECK_THROWS(mrt_mrc(CMatrix::Zero(2, 2)));
}

TEST_CASE("MRT/MRC matches a singular value decomposition", "[beams]")
{
    Rng rng = make_rng(6, {});
    for (int trial = 0; trial < 200; ++trial)
    {
        const Eigen::Index nr = 1 + static_cast<Eigen::Index>(uniform(rng, 0, 6));
        const Eigen::Index nt = 1 + static_cast<Eigen::Index>(uniform(rng, 0, 6));
        const CMatrix h = testing::random_cmatrix(nr, nt, rng);
        const double s0 = Eigen::JacobiSVD<CMatrix>(h).singularValues()(0);
        const double top = s0 * s0;
        const auto r = mrt_mrc(h);
        REQUIRE_THAT(r.gain, WithinRel(top, 1e-9));
        REQUIRE_THAT(bf_gain(h, r.f, r.w), WithinRel(top, 1e-9));
    }
}

TEST_CASE("MRT/MRC with nearly degenerate singular values", "[beams]")
{
    // two orthogonal paths with almost equal strength
    const CVector a1 = upa_response({4, 1, 0.5}, 0.0, kPi / 2) / 2.0, a2 = upa_response({4, 1, 0.5}, kPi / 2, kPi / 2) / 2.0;
    const CMatrix h = a1 * a1.adjoint() + (1.0 - 1e-7) * a2 * a2.adjoint();
    const auto r = mrt_mrc(h);
    CHECK_THAT(r.gain, WithinRel(1.0, 1e-9));
}

TEST_CASE("Unit-modulus projection", "[beams]")
{
    const double s = 1 / std::sqrt(2.0);
    CHECK((unit_modulus_project(vec({2.0, 2.0 * J})) - vec({s, J * s})).norm() < 1e-12);
    const CVector u = vec({s, std::polar(s, 1.0)});
    CHECK((unit_modulus_project(u) - u).norm() < 1e-12);
    const CVector z = unit_modulus_project(vec({0.0, J}));
    CHECK((z - vec({s, J * s})).norm() < 1e-12);

    Rng rng = make_rng(8, {});
    for (int t = 0; t < 100; ++t)
    {
        const CVector v = unit_modulus_project(testing::random_cvector(7, rng));
        REQUIRE(is_unit_modulus(v));
        REQUIRE_THAT(v.norm(), WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("Beam ordering MRT >= DFT+EGC >= genie", "[beams][property]")
{
    const auto ds = generate_scenario(testing::two_cluster_scenario(), 200, 3);
    const auto cbt = dft_codebook({4, 4, 0.5}, 2, 1), cbr = dft_codebook({2, 2, 0.5}, 2, 1);
    for (const auto &s : ds.samples)
    {
        const double mrt = mrt_mrc(s.h).gain;
        double egc = 0, genie = 0;
        for (Eigen::Index t = 0; t < cbt.size(); ++t)
        {
            const CVector f = cbt.beam(t);
            egc = std::max(egc, bf_gain(s.h, f, egc_combiner(s.h, f)));
            for (Eigen::Index r = 0; r < cbr.size(); ++r)
                genie = std::max(genie, bf_gain(s.h, f, cbr.beam(r)));
        }
        REQUIRE(mrt >= egc * (1 - 1e-9));
        REQUIRE(egc >= genie * (1 - 1e-9));
        REQUIRE(mrt <= s.h.squaredNorm() * (1 + 1e-12));
    }
}

TEST_CASE("Beam pattern peaks", "[beams]")
{
    const ArrayConfig a{2, 1, 0.5};
    const CVector v = upa_response(a, 0.3, kPi / 2) / std::sqrt(2.0);
    const std::vector<double> grid{-0.5, 0.0, 0.3, 0.9};
    const auto p = beam_pattern(v, a, grid, kPi / 2);
    CHECK_THAT(p[2], WithinAbs(10 * std::log10(2.0), 1e-9));
    for (double x : p)
        CHECK(x <= 10 * std::log10(2.0) + 1e-9);

    const ArrayConfig b{4, 2, 0.5};
    const CVector uni = CVector::Constant(8, 1 / std::sqrt(8.0));
    const std::vector<double> broadside{0.0};
    CHECK_THAT(beam_pattern(uni, b, broadside, kPi / 2)[0], WithinAbs(10 * std::log10(8.0), 1e-9));

    // DFT beam m_y = 3 of an 8-element ULA with q = 2 points at asin(2 * 3 / 16)
    const auto cb = dft_codebook({8, 1, 0.5}, 2, 1);
    std::vector<double> dense;
    for (int i = 0; i <= 20000; ++i)
        dense.push_back(-kPi / 2 + kPi * i / 20000.0);
    const auto pat = beam_pattern(cb.beam(3), {8, 1, 0.5}, dense, kPi / 2);
    const auto k = std::max_element(pat.begin(), pat.end()) - pat.begin();
    CHECK_THAT(dense[static_cast<std::size_t>(k)], WithinAbs(std::asin(6.0 / 16.0), kPi / 20000.0));
}

TEST_CASE("Pattern CSV", "[beams][io]")
{
    const auto dir = testing::temp_dir("pattern");
    const std::vector<double> az{0.0, 0.5}, g{1.25, -3.5};
    write_pattern_csv(dir / "p.csv", az, g);
    std::ifstream in(dir / "p.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "az_rad,gain_db");
    std::getline(in, line);
    CHECK(line == "0,1.25");
    std::getline(in, line);
    CHECK(line == "0.5,-3.5");
}
