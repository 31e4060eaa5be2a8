#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "nrpose/error.hpp"
#include "nrpose/mathcore.hpp"

namespace nrpose {

/// Decoded raster, row-major samples, 1 (gray) or 3 (RGB) channels.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    int maxval = 255;
    std::vector<std::uint16_t> samples;

    std::uint16_t at(int row, int col, int channel = 0) const {
        return samples[(static_cast<std::size_t>(row) * width + col) * channels + channel];
    }
};

namespace detail {

class NetpbmParser {
public:
    NetpbmParser(const std::vector<unsigned char>& bytes, const std::string& path) : b_(bytes), path_(path) {}

    Raster parse() {
        if (b_.size() < 2 || b_[0] != 'P')
            fail("not a netpbm file");
        const char kind = static_cast<char>(b_[1]);
        pos_ = 2;
        Raster r;
        bool binary = false;
        switch (kind) {
        case '2': r.channels = 1; break;
        case '3': r.channels = 3; break;
        case '5': r.channels = 1; binary = true; break;
        case '6': r.channels = 3; binary = true; break;
        default: fail(std::string("unsupported netpbm variant P") + kind);
        }
        r.width = next_int();
        r.height = next_int();
        r.maxval = next_int();
        if (r.width <= 0 || r.height <= 0)
            fail("invalid dimensions");
        if (r.maxval <= 0 || r.maxval > 65535)
            fail("invalid maxval");
        const std::size_t count = static_cast<std::size_t>(r.width) * r.height * r.channels;
        r.samples.resize(count);
        if (binary) {
            // exactly one whitespace byte separates the header from the data
            if (pos_ >= b_.size() || !std::isspace(b_[pos_]))
                fail("malformed header");
            ++pos_;
            const std::size_t width = r.maxval < 256 ? 1 : 2;
            if (b_.size() - pos_ < count * width)
                fail("truncated pixel data");
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t v = b_[pos_++];
                if (width == 2)
                    v = static_cast<std::uint16_t>((v << 8) | b_[pos_++]);
                r.samples[i] = v;
            }
        } else {
            for (std::size_t i = 0; i < count; ++i)
                r.samples[i] = static_cast<std::uint16_t>(next_int());
        }
        for (auto v : r.samples)
            if (v > r.maxval)
                fail("sample exceeds maxval");
        return r;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw IngestionError(path_, what); }

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n')
                    ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_]))
            fail("malformed header or truncated data");
        long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > 1'000'000'000)
                fail("number out of range");
        }
        return static_cast<int>(v);
    }

    const std::vector<unsigned char>& b_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Reads P2/P3/P5/P6 files (8 or 16 bit).
inline Raster read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError(path.string(), "cannot open file");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return detail::NetpbmParser(bytes, path.string()).parse();
}

/// Writes an image with entries in [0, 1] as an 8-bit binary graymap (P5).
/// Values are clamped and rounded to the nearest of 256 levels.
inline void write_pgm(const std::filesystem::path& path, const ImageMatrix& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError(path.string(), "cannot open file for writing");
    out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
    std::string row(static_cast<std::size_t>(img.cols()), '\0');
    for (Index i = 0; i < img.rows(); ++i) {
        for (Index j = 0; j < img.cols(); ++j) {
            const double v = std::clamp(img(i, j), 0.0, 1.0);
            row[static_cast<std::size_t>(j)] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        throw IngestionError(path.string(), "write failed");
}

} // namespace nrpose
