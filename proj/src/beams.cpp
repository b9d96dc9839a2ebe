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

#include "gfbeam/beams.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace gfbeam
{
    void LinkBudget::validate() const
    {
        if (!(bandwidth_hz > 0.0))
            throw ConfigError("Link budget bandwidth must be positive.");
    }

    LinkBudget LinkBudget::from_watts(double tx_w, double noise_w)
    {
        LinkBudget b;
        b.bandwidth_hz = 1.0;
        b.tx_power_dbm = 10.0 * std::log10(tx_w) + 30.0;
        b.noise_psd_dbm_hz = noise_w > 0.0 ? 10.0 * std::log10(noise_w) + 30.0 : -INFINITY;
        return b;
    }

    Codebook dft_codebook(const ArrayConfig &cfg, int q_y, int q_z)
    {
        cfg.validate();
        if (q_y < 1 || q_z < 1)
            throw ConfigError("Codebook oversampling factors must be at least 1.");

        const int m_y_count = q_y * cfg.n_y;
        const int m_z_count = q_z * cfg.n_z;
        const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.size()));

        Codebook cb;
        cb.q_y = q_y;
        cb.q_z = q_z;
        cb.array = cfg;
        cb.beams.resize(cfg.size(), static_cast<Eigen::Index>(m_y_count) * m_z_count);
        for (int mz = 0; mz < m_z_count; ++mz)
            for (int my = 0; my < m_y_count; ++my)
            {
                const Eigen::Index col = static_cast<Eigen::Index>(mz) * m_y_count + my;
                for (int iz = 0; iz < cfg.n_z; ++iz)
                    for (int iy = 0; iy < cfg.n_y; ++iy)
                    {
                        // exact integer phase numerators keep q=1 columns orthogonal to rounding
                        const double phase = 2.0 * kPi *
                                             (static_cast<double>((iy * my) % m_y_count) / m_y_count +
                                              static_cast<double>((iz * mz) % m_z_count) / m_z_count);
                        cb.beams(iz * cfg.n_y + iy, col) = std::polar(scale, phase);
                    }
            }
        return cb;
    }

    double bf_gain(const CMatrix &h, const CVector &f, const CVector &w)
    {
        if (h.cols() != f.size() || h.rows() != w.size())
            throw ConfigError("bf_gain: dimension mismatch.");
        return std::norm(w.dot(h * f)); // dot() conjugates the first argument
    }

    Snr snr_from_gain(double gain, const LinkBudget &budget)
    {
        Snr s;
        s.linear = budget.tx_power_w() * gain / budget.noise_power_w();
        s.db = 10.0 * std::log10(s.linear);
        return s;
    }

    Snr snr(const CMatrix &h, const CVector &f, const CVector &w, const LinkBudget &budget)
    {
        return snr_from_gain(bf_gain(h, f, w), budget);
    }

    double normalized_gain(const CMatrix &h, const CVector &f, const CVector &w)
    {
        const double energy = h.squaredNorm();
        if (!(energy > 0.0))
            throw ConfigError("normalized_gain: channel has zero norm.");
        return bf_gain(h, f, w) / energy;
    }

    CVector egc_combiner(const CMatrix &h, const CVector &f)
    {
        const CVector g = h * f;
        const double scale = 1.0 / std::sqrt(static_cast<double>(g.size()));
        CVector w(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i)
            w(i) = g(i) == cplx(0.0, 0.0) ? cplx(scale, 0.0) : std::polar(scale, std::arg(g(i)));
        return w;
    }

    namespace
    {
        // Dominant eigenvector of a Hermitian PSD matrix.
        CVector dominant_eigenvector(const CMatrix &g)
        {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
            if (es.info() != Eigen::Success)
                throw NumericalError("mrt_mrc: eigensolver did not converge.");
            // eigenvalues come in increasing order
            return es.eigenvectors().col(g.rows() - 1);
        }
    }

    MrtMrc mrt_mrc(const CMatrix &h)
    {
        if (!(h.squaredNorm() > 0.0))
            throw ConfigError("mrt_mrc: channel has zero norm.");
        if (!h.allFinite())
            throw NumericalError("mrt_mrc: channel has non-finite entries.");
        MrtMrc out;
        if (h.rows() < h.cols())
        {
            // left singular vector from h h^H, then f = h^H w / ||h^H w||
            const CVector w = dominant_eigenvector(h * h.adjoint());
            out.f = (h.adjoint() * w).normalized();
        }
        else
            out.f = dominant_eigenvector(h.adjoint() * h);
        CVector w = h * out.f;
        out.gain = w.squaredNorm();
        w.normalize();
        out.w = w;
        return out;
    }

    CVector unit_modulus_project(const CVector &x)
    {
        constexpr double eps = 1e-12;
        const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
        CVector v(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double m = std::abs(x(i));
            v(i) = m == 0.0 ? cplx(scale, 0.0) : x(i) / (std::max(m, eps)) * scale;
        }
        return v;
    }

    bool is_unit_modulus(const CVector &v, double tol)
    {
        const double target = 1.0 / std::sqrt(static_cast<double>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (std::abs(std::abs(v(i)) - target) > tol)
                return false;
        return true;
    }

    std::vector<double> beam_pattern(const CVector &v, const ArrayConfig &cfg, std::span<const double> az_grid,
                                     double el)
    {
        if (az_grid.empty())
            throw ConfigError("beam_pattern: azimuth grid is empty.");
        if (v.size() != cfg.size())
            throw ConfigError("beam_pattern: beam length does not match the array.");
        std::vector<double> out;
        out.reserve(az_grid.size());
        for (double az : az_grid)
            out.push_back(10.0 * std::log10(std::norm(upa_response(cfg, az, el).dot(v))));
        return out;
    }

    void write_pattern_csv(const std::filesystem::path &path, std::span<const double> az_grid,
                           std::span<const double> gain_db)
    {
        std::ofstream out(path);
        if (!out)
            throw ConfigError("Cannot open '" + path.string() + "' for writing.");
        out << "az_rad,gain_db\n";
        char line[96];
        for (std::size_t i = 0; i < az_grid.size(); ++i)
        {
            std::snprintf(line, sizeof line, "%.17g,%.17g\n", az_grid[i], gain_db[i]);
            out << line;
        }
    }
}
