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
#include "gfbeam/model.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <iterator>

namespace gfbeam
{
    using nlohmann::json;

    namespace
    {
        constexpr const char *kGfMagic = "BFGF1\n";
        constexpr const char *kCbMagic = "BFCB1\n";
        constexpr std::size_t kMagicLen = 6;

        void put(std::string &buf, const diff::Tensor &t)
        {
            // column-major, as Eigen stores it
            const auto n = static_cast<std::size_t>(t.size());
            const std::size_t off = buf.size();
            buf.resize(off + 8 * n);
            std::memcpy(buf.data() + off, t.data(), 8 * n);
        }

        void write_model(const ProbingModel &m, const char *magic, json header, const std::filesystem::path &path)
        {
            header["config"] = to_json(m.config);
            header["n_t"] = m.n_t;
            header["n_r"] = m.n_r;
            json params = json::array();
            for (std::size_t i = 0; i < m.params.size(); ++i)
                params.push_back({{"name", m.params.names()[i]}, {"rows", m.params.at(i).rows()},
                                  {"cols", m.params.at(i).cols()}});
            const bool fitted = m.stats.fitted();
            if (fitted)
            {
                params.push_back({{"name", "feature.mean"}, {"rows", m.stats.mean.size()}, {"cols", 1}});
                params.push_back({{"name", "feature.std"}, {"rows", m.stats.stddev.size()}, {"cols", 1}});
            }
            header["params"] = params;

            std::string buf(magic, kMagicLen);
            buf += header.dump();
            buf.push_back('\n');
            for (std::size_t i = 0; i < m.params.size(); ++i)
                put(buf, m.params.at(i));
            if (fitted)
            {
                put(buf, m.stats.mean);
                put(buf, m.stats.stddev);
            }
            std::ofstream out(path, std::ios::binary);
            if (!out)
                throw ConfigError("Cannot open '" + path.string() + "' for writing.");
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            if (!out)
                throw ConfigError("Failed writing model file '" + path.string() + "'.");
        }

        struct RawModel
        {
            json header;
            std::string payload;
        };

        RawModel read_model(const std::filesystem::path &path, const char *magic)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw ConfigError("Cannot open model file '" + path.string() + "'.");
            const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            if (data.size() < kMagicLen || data.compare(0, kMagicLen, magic) != 0)
                throw FormatError("'" + path.string() + "' is not a " + std::string(magic, kMagicLen - 1) + " model file.");
            const auto eol = data.find('\n', kMagicLen);
            if (eol == std::string::npos)
                throw FormatError("Model file '" + path.string() + "': truncated header.");
            RawModel raw;
            try
            {
                raw.header = json::parse(data.begin() + kMagicLen, data.begin() + static_cast<std::ptrdiff_t>(eol));
            }
            catch (const json::exception &e)
            {
                throw FormatError("Model file '" + path.string() + "': malformed header: " + e.what());
            }
            raw.payload = data.substr(eol + 1);
            return raw;
        }

        // Copies the payload into a freshly initialized model, checking names and shapes.
        void fill(ProbingModel &m, const RawModel &raw, const std::filesystem::path &path)
        {
            const auto bad = [&](const std::string &what) {
                return FormatError("Model file '" + path.string() + "': " + what);
            };
            std::size_t off = 0;
            std::size_t expected = 0;
            const json &params = raw.header.at("params");
            for (const auto &p : params)
                expected += 8 * p.at("rows").get<std::size_t>() * p.at("cols").get<std::size_t>();
            if (expected != raw.payload.size())
                throw bad("header/payload size disagreement");

            auto take = [&](diff::Tensor &t, const json &p) {
                if (p.at("rows").get<Eigen::Index>() != t.rows() || p.at("cols").get<Eigen::Index>() != t.cols())
                    throw bad("shape mismatch for parameter '" + p.at("name").get<std::string>() + "'");
                const auto n = static_cast<std::size_t>(t.size());
                std::memcpy(t.data(), raw.payload.data() + off, 8 * n);
                off += 8 * n;
                if (!t.allFinite())
                    throw bad("non-finite values in '" + p.at("name").get<std::string>() + "'");
            };

            const std::size_t n_params = m.params.size();
            if (params.size() != n_params && params.size() != n_params + 2)
                throw bad("unexpected parameter count");
            for (std::size_t i = 0; i < n_params; ++i)
            {
                if (params[i].at("name").get<std::string>() != m.params.names()[i])
                    throw bad("unexpected parameter '" + params[i].at("name").get<std::string>() + "'");
                take(m.params.at(i), params[i]);
            }
            if (params.size() == n_params + 2)
            {
                const auto k = static_cast<Eigen::Index>(m.config.n_probe);
                diff::Tensor mean(k, 1), stddev(k, 1);
                take(mean, params[n_params]);
                take(stddev, params[n_params + 1]);
                m.stats.mean = mean.col(0);
                m.stats.stddev = stddev.col(0);
            }
        }
    }

    void save_model(const GfModel &m, const std::filesystem::path &path)
    {
        write_model(m, kGfMagic, json{{"kind", "dl_gf"}}, path);
    }

    void save_model(const CbModel &m, const std::filesystem::path &path)
    {
        write_model(m, kCbMagic, json{{"kind", "dl_cb"}, {"m_t", m.m_t}, {"m_r", m.m_r}}, path);
    }

    GfModel load_gf_model(const std::filesystem::path &path)
    {
        const auto raw = read_model(path, kGfMagic);
        try
        {
            auto m = GfModel::init(gf_config_from_json(raw.header.at("config")), raw.header.at("n_t").get<int>(),
                                   raw.header.at("n_r").get<int>());
            fill(m, raw, path);
            return m;
        }
        catch (const json::exception &e)
        {
            throw FormatError("Model file '" + path.string() + "': malformed header: " + e.what());
        }
        catch (const ConfigError &e)
        {
            throw FormatError("Model file '" + path.string() + "': invalid configuration: " + e.what());
        }
    }

    CbModel load_cb_model(const std::filesystem::path &path)
    {
        const auto raw = read_model(path, kCbMagic);
        try
        {
            auto m = CbModel::init(gf_config_from_json(raw.header.at("config")), raw.header.at("n_t").get<int>(),
                                   raw.header.at("n_r").get<int>(), raw.header.at("m_t").get<int>(),
                                   raw.header.at("m_r").get<int>());
            fill(m, raw, path);
            return m;
        }
        catch (const json::exception &e)
        {
            throw FormatError("Model file '" + path.string() + "': malformed header: " + e.what());
        }
        catch (const ConfigError &e)
        {
            throw FormatError("Model file '" + path.string() + "': invalid configuration: " + e.what());
        }
    }
}

namespace gfbeam
{
    ModelKind model_kind(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("Cannot open model file '" + path.string() + "'.");
        std::string head(kMagicLen, '\0');
        in.read(head.data(), static_cast<std::streamsize>(kMagicLen));
        if (head == kGfMagic)
            return ModelKind::gf;
        if (head == kCbMagic)
            return ModelKind::cb;
        throw FormatError("'" + path.string() + "' is not a model file.");
    }
}
