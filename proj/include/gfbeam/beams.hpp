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

#ifndef gfbeam_beams_H
#define gfbeam_beams_H

#include "gfbeam/channel.hpp"
#include "gfbeam/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gfbeam
{
    // Oversampled 2D DFT codebook. Column (m_y, m_z) sits at index m_z * (q_y * n_y) + m_y.
    struct Codebook
    {
        CMatrix beams; // N x M
        int q_y = 1, q_z = 1;
        ArrayConfig array;

        Eigen::Index size() const { return beams.cols(); }
        auto beam(Eigen::Index m) const { return beams.col(m); }
    };

    // Transmit power and thermal noise. The noise power is PSD integrated over the bandwidth.
    struct LinkBudget
    {
        double tx_power_dbm = 20.0;
        double noise_psd_dbm_hz = -173.0;
        double bandwidth_hz = 100e6;

        double tx_power_w() const { return std::pow(10.0, (tx_power_dbm - 30.0) / 10.0); }
        double noise_power_w() const
        {
            return std::pow(10.0, (noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz) - 30.0) / 10.0);
        }
        void validate() const;

        // Budget with the given linear powers over a 1 Hz bandwidth. noise_w may be 0.
        static LinkBudget from_watts(double tx_w, double noise_w);
    };

    Codebook dft_codebook(const ArrayConfig &cfg, int q_y, int q_z);

    // |w^H h f|^2
    double bf_gain(const CMatrix &h, const CVector &f, const CVector &w);

    struct Snr
    {
        double linear = 0.0;
        double db = 0.0;
    };

    // Deterministic SNR: P_T |w^H h f|^2 / sigma^2
    Snr snr(const CMatrix &h, const CVector &f, const CVector &w, const LinkBudget &budget);
    Snr snr_from_gain(double gain, const LinkBudget &budget);

    // |w^H h f|^2 / ||h||_F^2
    double normalized_gain(const CMatrix &h, const CVector &f, const CVector &w);

    // Unit-modulus combiner co-phased with h f.
    CVector egc_combiner(const CMatrix &h, const CVector &f);

    struct MrtMrc
    {
        CVector f, w;
        double gain = 0.0; // sigma_max(h)^2
    };

    // Top singular pair of h from the eigendecomposition of the smaller Gram matrix.
    MrtMrc mrt_mrc(const CMatrix &h);

    // [v]_i = [x]_i / (max(|[x]_i|, 1e-12) sqrt(N)); exact zeros map to 1/sqrt(N).
    CVector unit_modulus_project(const CVector &x);

    bool is_unit_modulus(const CVector &v, double tol = 1e-9);

    // 10 log10 |a(az, el)^H v|^2 over an azimuth grid at fixed elevation.
    std::vector<double> beam_pattern(const CVector &v, const ArrayConfig &cfg, std::span<const double> az_grid,
                                     double el);

    // CSV with columns az_rad, gain_db.
    void write_pattern_csv(const std::filesystem::path &path, std::span<const double> az_grid,
                           std::span<const double> gain_db);
}

#endif
