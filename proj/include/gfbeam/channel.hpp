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

#ifndef gfbeam_channel_H
#define gfbeam_channel_H

#include "gfbeam/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gfbeam
{
    // Uniform planar array in the y-z plane.
    struct ArrayConfig
    {
        int n_y = 1;
        int n_z = 1;
        double spacing = 0.5; // d / lambda

        int size() const { return n_y * n_z; }
        void validate() const;
        bool operator==(const ArrayConfig &) const = default;
    };

    struct PathParams
    {
        double gain = 0.0;          // |alpha_l|
        double doppler_phase = 0.0; // theta_l [rad]
        double delay = 0.0;         // tau_l [s]
        double aoa_az = 0.0, aoa_el = 0.0;
        double aod_az = 0.0, aod_el = 0.0;
    };

    // Intrinsic z-y'-x'' rotation of the UE body frame.
    struct Orientation
    {
        double rot_z = 0.0, rot_y = 0.0, rot_x = 0.0;
        bool operator==(const Orientation &) const = default;
    };

    struct Direction
    {
        double az = 0.0;
        double el = 0.0;
    };

    struct Interval
    {
        double lo = 0.0, hi = 0.0;
        bool operator==(const Interval &) const = default;
    };

    struct Cluster
    {
        double aod_az_center = 0.0, aod_el_center = kPi / 2.0;
        double aoa_az_center = 0.0, aoa_el_center = kPi / 2.0;
        double angular_spread = 0.0; // half-width of the uniform spread [rad]
        double gain_db_mean = 0.0, gain_db_std = 0.0;
        bool operator==(const Cluster &) const = default;
    };

    struct ScenarioConfig
    {
        ArrayConfig tx_array{8, 8, 0.5};
        ArrayConfig rx_array{4, 4, 0.5};
        double bandwidth_hz = 100e6;
        int num_paths = 3;
        std::vector<Cluster> clusters;
        double delay_spread_s = 100e-9;
        // z, y, x rotation ranges; the defaults are the random-orientation ranges
        std::array<Interval, 3> rotation_ranges{Interval{-kPi, kPi}, Interval{-kPi / 2, kPi / 2}, Interval{-kPi / 2, kPi / 2}};
        std::uint64_t seed = 1;

        void validate() const;
        bool rotation_enabled() const;
        bool operator==(const ScenarioConfig &) const = default;
    };

    struct ChannelSample
    {
        CMatrix h; // N_R x N_T
        Orientation orientation;
        std::vector<PathParams> paths;
        std::int64_t id = 0;
    };

    enum class Split : std::uint8_t
    {
        train = 0,
        val = 1,
        test = 2
    };

    const char *split_name(Split s);

    struct Dataset
    {
        std::vector<ChannelSample> samples;
        std::vector<Split> split; // one tag per sample
        std::uint64_t seed = 0;
        std::string scenario_json = "{}"; // provenance, written into the file header
        bool has_orientation = true;

        std::size_t size() const { return samples.size(); }
        int n_r() const { return samples.empty() ? 0 : static_cast<int>(samples.front().h.rows()); }
        int n_t() const { return samples.empty() ? 0 : static_cast<int>(samples.front().h.cols()); }
        std::vector<std::size_t> indices(Split s) const;
        std::vector<const ChannelSample *> subset(Split s) const;
    };

    struct SplitFractions
    {
        double train = 0.6, val = 0.2, test = 0.2;
    };

    // a_z(el) (x) a_y(az, el); entry index = i_z * n_y + i_y, every entry has unit magnitude.
    CVector upa_response(const ArrayConfig &cfg, double az, double el);

    Eigen::Matrix3d rotation_matrix(const Orientation &o);

    // Global direction -> direction in the rotated UE frame (applies R^T).
    Direction apply_orientation(const Orientation &o, double az, double el);

    CMatrix synthesize_channel(std::span<const PathParams> paths, const ArrayConfig &tx, const ArrayConfig &rx,
                               double bandwidth_hz);

    Dataset generate_scenario(const ScenarioConfig &cfg, std::size_t n, std::uint64_t seed);

    Dataset split_dataset(Dataset ds, const SplitFractions &fractions, std::uint64_t seed);

    // Adds complex AWGN to the train split only. nmse_db = -inf disables corruption.
    Dataset corrupt_dataset(const Dataset &ds, double nmse_db, std::uint64_t seed);

    void save_dataset(const Dataset &ds, const std::filesystem::path &path);
    Dataset load_dataset(const std::filesystem::path &path);
}

#endif
