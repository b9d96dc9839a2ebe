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

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

static_assert(std::endian::native == std::endian::little, "Channel files are little-endian; big-endian hosts are not supported.");

namespace gfbeam
{
    namespace
    {
        constexpr char kMagic[] = "BFCHAN1\n";
        constexpr std::size_t kMagicLen = 8;

        void put_f32(std::string &buf, double v)
        {
            const float f = static_cast<float>(v);
            char b[4];
            std::memcpy(b, &f, 4);
            buf.append(b, 4);
        }

        double get_f32(const char *p)
        {
            float f;
            std::memcpy(&f, p, 4);
            return static_cast<double>(f);
        }
    }

    void save_dataset(const Dataset &ds, const std::filesystem::path &path)
    {
        nlohmann::json header;
        header["num"] = ds.size();
        header["n_r"] = ds.n_r();
        header["n_t"] = ds.n_t();
        header["has_orientation"] = ds.has_orientation;
        header["seed"] = ds.seed;
        header["scenario"] = nlohmann::json::parse(ds.scenario_json.empty() ? "{}" : ds.scenario_json);
        std::string split;
        split.reserve(ds.size());
        for (auto s : ds.split)
            split.push_back(static_cast<char>('0' + static_cast<int>(s)));
        header["split"] = split;

        std::string buf(kMagic, kMagicLen);
        buf += header.dump();
        buf.push_back('\n');

        const int n_r = ds.n_r(), n_t = ds.n_t();
        buf.reserve(buf.size() + ds.size() * (static_cast<std::size_t>(n_r * n_t) * 8 + 12));
        for (const auto &s : ds.samples)
        {
            if (s.h.rows() != n_r || s.h.cols() != n_t)
                throw ConfigError("save_dataset: samples have inconsistent channel dimensions.");
            for (int r = 0; r < n_r; ++r)
                for (int t = 0; t < n_t; ++t)
                {
                    put_f32(buf, s.h(r, t).real());
                    put_f32(buf, s.h(r, t).imag());
                }
        }
        if (ds.has_orientation)
            for (const auto &s : ds.samples)
            {
                put_f32(buf, s.orientation.rot_z);
                put_f32(buf, s.orientation.rot_y);
                put_f32(buf, s.orientation.rot_x);
            }

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ConfigError("Cannot open '" + path.string() + "' for writing.");
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out)
            throw ConfigError("Failed writing '" + path.string() + "'.");
    }

    Dataset load_dataset(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("Cannot open channel file '" + path.string() + "'.");
        const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

        if (data.size() < kMagicLen || data.compare(0, kMagicLen, kMagic, kMagicLen) != 0)
            throw FormatError("'" + path.string() + "' is not a channel file (magic mismatch).");
        const auto eol = data.find('\n', kMagicLen);
        if (eol == std::string::npos)
            throw FormatError("Channel file header is truncated.");

        nlohmann::json header;
        try
        {
            header = nlohmann::json::parse(data.begin() + kMagicLen, data.begin() + static_cast<std::ptrdiff_t>(eol));
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("Channel file header is not valid JSON: ") + e.what());
        }

        Dataset ds;
        std::size_t num = 0;
        int n_r = 0, n_t = 0;
        try
        {
            num = header.at("num").get<std::size_t>();
            n_r = header.at("n_r").get<int>();
            n_t = header.at("n_t").get<int>();
            ds.has_orientation = header.at("has_orientation").get<bool>();
            ds.seed = header.at("seed").get<std::uint64_t>();
            ds.scenario_json = header.at("scenario").dump();
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("Channel file header is missing a field: ") + e.what());
        }
        if (num > 0 && (n_r < 1 || n_t < 1))
            throw FormatError("Channel file header declares empty channel matrices.");

        const std::size_t per_sample = static_cast<std::size_t>(n_r) * static_cast<std::size_t>(n_t) * 8;
        const std::size_t expected = num * per_sample + (ds.has_orientation ? num * 12 : 0);
        const std::size_t available = data.size() - eol - 1;
        if (available < expected)
            throw FormatError("Channel file payload is truncated: expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(available) + ".");
        if (available > expected)
            throw FormatError("Channel file header/payload size disagreement: expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(available) + ".");

        ds.split.assign(num, Split::train);
        if (header.contains("split"))
        {
            const auto split = header["split"].get<std::string>();
            if (split.size() != num)
                throw FormatError("Channel file split tags do not match the sample count.");
            for (std::size_t i = 0; i < num; ++i)
            {
                if (split[i] < '0' || split[i] > '2')
                    throw FormatError("Channel file contains an invalid split tag.");
                ds.split[i] = static_cast<Split>(split[i] - '0');
            }
        }

        const char *p = data.data() + eol + 1;
        ds.samples.resize(num);
        for (std::size_t i = 0; i < num; ++i)
        {
            auto &s = ds.samples[i];
            s.id = static_cast<std::int64_t>(i);
            s.h.resize(n_r, n_t);
            for (int r = 0; r < n_r; ++r)
                for (int t = 0; t < n_t; ++t)
                {
                    s.h(r, t) = cplx(get_f32(p), get_f32(p + 4));
                    p += 8;
                }
            if (!s.h.allFinite())
                throw FormatError("Channel file sample " + std::to_string(i) + " has non-finite entries.");
        }
        if (ds.has_orientation)
            for (auto &s : ds.samples)
            {
                s.orientation = {get_f32(p), get_f32(p + 4), get_f32(p + 8)};
                p += 12;
            }
        return ds;
    }
}
