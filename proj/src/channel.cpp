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

#include "gfbeam/channel.hpp"
#include "gfbeam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfbeam
{
    namespace
    {
        double wrap_azimuth(double az)
        {
            az = std::remainder(az, 2.0 * kPi); // [-pi, pi]
            if (az <= -kPi)
                az += 2.0 * kPi;
            return az;
        }
    }

    void ArrayConfig::validate() const
    {
        if (n_y < 1 || n_z < 1)
            throw ConfigError("Array dimensions must be at least 1 (got " + std::to_string(n_y) + "x" +
                              std::to_string(n_z) + ").");
        if (!(spacing > 0.0))
            throw ConfigError("Antenna spacing must be positive.");
    }

    void ScenarioConfig::validate() const
    {
        tx_array.validate();
        rx_array.validate();
        if (!(bandwidth_hz > 0.0))
            throw ConfigError("Bandwidth must be positive.");
        if (num_paths < 1)
            throw ConfigError("num_paths must be at least 1.");
        if (clusters.empty())
            throw ConfigError("Scenario needs at least one cluster.");
        for (const auto &c : clusters)
        {
            if (!(c.angular_spread >= 0.0))
                throw ConfigError("Cluster angular_spread must be non-negative.");
            if (!(c.gain_db_std >= 0.0))
                throw ConfigError("Cluster gain_db_std must be non-negative.");
        }
        if (!(delay_spread_s >= 0.0))
            throw ConfigError("delay_spread_s must be non-negative.");
        for (const auto &r : rotation_ranges)
            if (!(r.lo <= r.hi))
                throw ConfigError("Rotation range lower bound exceeds upper bound.");
    }

    bool ScenarioConfig::rotation_enabled() const
    {
        return std::any_of(rotation_ranges.begin(), rotation_ranges.end(),
                           [](const Interval &r) { return r.lo != 0.0 || r.hi != 0.0; });
    }

    const char *split_name(Split s)
    {
        switch (s)
        {
        case Split::train:
            return "train";
        case Split::val:
            return "val";
        case Split::test:
            return "test";
        }
        return "?";
    }

    std::vector<std::size_t> Dataset::indices(Split s) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s)
                out.push_back(i);
        return out;
    }

    std::vector<const ChannelSample *> Dataset::subset(Split s) const
    {
        std::vector<const ChannelSample *> out;
        for (auto i : indices(s))
            out.push_back(&samples[i]);
        return out;
    }

    CVector upa_response(const ArrayConfig &cfg, double az, double el)
    {
        const double phase_y = 2.0 * kPi * cfg.spacing * std::sin(az) * std::sin(el);
        const double phase_z = 2.0 * kPi * cfg.spacing * std::cos(el);
        CVector a(cfg.size());
        for (int iz = 0; iz < cfg.n_z; ++iz)
            for (int iy = 0; iy < cfg.n_y; ++iy)
                a(iz * cfg.n_y + iy) = std::polar(1.0, iz * phase_z + iy * phase_y);
        return a;
    }

    Eigen::Matrix3d rotation_matrix(const Orientation &o)
    {
        using Eigen::AngleAxisd;
        using Eigen::Vector3d;
        return (AngleAxisd(o.rot_z, Vector3d::UnitZ()) * AngleAxisd(o.rot_y, Vector3d::UnitY()) *
                AngleAxisd(o.rot_x, Vector3d::UnitX()))
            .toRotationMatrix();
    }

    Direction apply_orientation(const Orientation &o, double az, double el)
    {
        const Eigen::Vector3d u(std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el));
        const Eigen::Vector3d v = rotation_matrix(o).transpose() * u;

        Direction d;
        d.el = std::acos(std::clamp(v.z(), -1.0, 1.0));
        // Azimuth is undefined at the poles
        if (std::hypot(v.x(), v.y()) < 1e-12)
            d.az = 0.0;
        else
            d.az = wrap_azimuth(std::atan2(v.y(), v.x()));
        return d;
    }

    CMatrix synthesize_channel(std::span<const PathParams> paths, const ArrayConfig &tx, const ArrayConfig &rx,
                               double bandwidth_hz)
    {
        if (paths.empty())
            throw ConfigError("synthesize_channel: at least one path is required.");
        CMatrix h = CMatrix::Zero(rx.size(), tx.size());
        for (const auto &p : paths)
        {
            const cplx coeff = std::polar(p.gain, p.doppler_phase - 2.0 * kPi * p.delay * bandwidth_hz);
            const CVector a_r = upa_response(rx, p.aoa_az, p.aoa_el);
            const CVector a_t = upa_response(tx, p.aod_az, p.aod_el);
            h.noalias() += coeff * a_r * a_t.adjoint();
        }
        return h;
    }

    Dataset generate_scenario(const ScenarioConfig &cfg, std::size_t n, std::uint64_t seed)
    {
        cfg.validate();
        if (n < 1)
            throw ConfigError("generate_scenario: sample count must be at least 1.");

        Dataset ds;
        ds.seed = seed;
        ds.samples.resize(n);
        ds.split.assign(n, Split::train);
        ds.has_orientation = true;

        const auto n_clusters = cfg.clusters.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            // Each sample owns its stream, so generation is order-independent.
            Rng rng = make_rng(seed, {0x6368616eULL, i});
            ChannelSample &s = ds.samples[i];
            s.id = static_cast<std::int64_t>(i);

            for (int attempt = 0;; ++attempt)
            {
                s.orientation.rot_z = uniform(rng, cfg.rotation_ranges[0].lo, cfg.rotation_ranges[0].hi);
                s.orientation.rot_y = uniform(rng, cfg.rotation_ranges[1].lo, cfg.rotation_ranges[1].hi);
                s.orientation.rot_x = uniform(rng, cfg.rotation_ranges[2].lo, cfg.rotation_ranges[2].hi);

                s.paths.assign(cfg.num_paths, PathParams{});
                for (auto &p : s.paths)
                {
                    auto ci = static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n_clusters)));
                    const Cluster &c = cfg.clusters[std::min(ci, n_clusters - 1)];
                    const double w = c.angular_spread;
                    p.aod_az = wrap_azimuth(c.aod_az_center + uniform(rng, -w, w));
                    p.aod_el = std::clamp(c.aod_el_center + uniform(rng, -w, w), 0.0, kPi);
                    const double aoa_az = wrap_azimuth(c.aoa_az_center + uniform(rng, -w, w));
                    const double aoa_el = std::clamp(c.aoa_el_center + uniform(rng, -w, w), 0.0, kPi);
                    const double gain_db = c.gain_db_mean + c.gain_db_std * normal(rng);
                    p.gain = std::pow(10.0, gain_db / 20.0);
                    p.doppler_phase = uniform(rng, -kPi, kPi);
                    p.delay = uniform(rng, 0.0, cfg.delay_spread_s);

                    const Direction local = apply_orientation(s.orientation, aoa_az, aoa_el);
                    p.aoa_az = local.az;
                    p.aoa_el = local.el;
                }
                s.h = synthesize_channel(s.paths, cfg.tx_array, cfg.rx_array, cfg.bandwidth_hz);

                const double norm = s.h.norm();
                if (std::isfinite(norm) && norm > 0.0)
                    break;
                if (attempt > 100)
                    throw NumericalError("generate_scenario: could not draw a non-zero channel for sample " +
                                         std::to_string(i));
            }
        }
        return ds;
    }

    Dataset split_dataset(Dataset ds, const SplitFractions &fractions, std::uint64_t seed)
    {
        const double total = fractions.train + fractions.val + fractions.test;
        if (std::abs(total - 1.0) > 1e-9 || fractions.train < 0 || fractions.val < 0 || fractions.test < 0)
            throw ConfigError("Split fractions must be non-negative and sum to 1.");
        const std::size_t n = ds.size();
        if (n < 5)
            throw ConfigError("split_dataset: at least 5 samples are required (got " + std::to_string(n) + ").");

        const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
        const auto n_val = std::min(n - n_train,
                                    static_cast<std::size_t>(std::llround(fractions.val * static_cast<double>(n))));

        // Fisher-Yates on the portable engine output
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng = make_rng(seed, {0x73706c6974ULL});
        for (std::size_t i = n - 1; i > 0; --i)
        {
            const auto j = static_cast<std::size_t>(rng() % (i + 1));
            std::swap(perm[i], perm[j]);
        }

        ds.split.assign(n, Split::test);
        for (std::size_t k = 0; k < n_train; ++k)
            ds.split[perm[k]] = Split::train;
        for (std::size_t k = n_train; k < n_train + n_val; ++k)
            ds.split[perm[k]] = Split::val;
        return ds;
    }

    Dataset corrupt_dataset(const Dataset &ds, double nmse_db, std::uint64_t seed)
    {
        if (ds.samples.empty())
            throw ConfigError("corrupt_dataset: dataset is empty.");
        Dataset out = ds;
        if (std::isinf(nmse_db) && nmse_db < 0)
            return out;

        const auto train = ds.indices(Split::train);
        if (train.empty())
            return out;

        double mean_energy = 0.0;
        for (auto i : train)
            mean_energy += ds.samples[i].h.squaredNorm();
        mean_energy /= static_cast<double>(train.size());

        const double n_entries = static_cast<double>(ds.n_r()) * static_cast<double>(ds.n_t());
        const double variance = db_to_linear(nmse_db) * mean_energy / n_entries;
        const double sigma = std::sqrt(variance / 2.0); // per real dimension

        for (auto i : train)
        {
            Rng rng = make_rng(seed, {0x636f7272ULL, i});
            CMatrix &h = out.samples[i].h;
            for (Eigen::Index c = 0; c < h.cols(); ++c)
                for (Eigen::Index r = 0; r < h.rows(); ++r)
                {
                    const double re = sigma * normal(rng);
                    const double im = sigma * normal(rng);
                    h(r, c) += cplx(re, im);
                }
        }
        return out;
    }
}
