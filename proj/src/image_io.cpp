#include "crend/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace crend {

namespace {

std::uint8_t quantize(double v) {
    const double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(q);
}

// Reads the next whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) {
        throw std::runtime_error(path + ": truncated header");
    }
    return tok;
}

struct PnmHeader {
    int width = 0;
    int height = 0;
};

PnmHeader read_header(std::istream& in, const std::string& path, const char* magic) {
    const std::string m = next_token(in, path);
    if (m != magic) {
        throw std::runtime_error(path + ": bad magic '" + m + "', expected " + magic);
    }
    PnmHeader h;
    try {
        h.width = std::stoi(next_token(in, path));
        h.height = std::stoi(next_token(in, path));
        const int maxval = std::stoi(next_token(in, path));
        if (maxval != 255) {
            throw std::runtime_error(path + ": unsupported maxval " + std::to_string(maxval));
        }
    } catch (const std::invalid_argument&) {
        throw std::runtime_error(path + ": malformed header");
    }
    if (h.width < 1 || h.height < 1) {
        throw std::runtime_error(path + ": bad dimensions " + std::to_string(h.width) + "x" +
                                 std::to_string(h.height));
    }
    return h;
}

}  // namespace

void write_image_ppm(const Tensor& image, const std::string& path) {
    if (image.ndim() != 3 || image.dim(0) != 3) {
        throw std::invalid_argument("write_image_ppm: expected 3 x H x W image, got " +
                                    shape_to_string(image.shape()));
    }
    const int h = static_cast<int>(image.dim(1));
    const int w = static_cast<int>(image.dim(2));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_image_ppm: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                row[static_cast<std::size_t>(x) * 3 + c] = quantize(image(c, y, x));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw std::runtime_error("write_image_ppm: write failed for " + path);
}

Tensor read_image_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_image_ppm: cannot open " + path);
    const PnmHeader hd = read_header(in, path, "P6");
    Tensor image({3, static_cast<std::size_t>(hd.height), static_cast<std::size_t>(hd.width)});
    std::vector<std::uint8_t> row(static_cast<std::size_t>(hd.width) * 3);
    for (int y = 0; y < hd.height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw std::runtime_error(path + ": truncated pixel data");
        for (int x = 0; x < hd.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                image(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
            }
        }
    }
    return image;
}

void write_mask_pgm(const Mask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_mask_pgm: cannot open " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw std::runtime_error("write_mask_pgm: write failed for " + path);
}

Mask read_mask_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_mask_pgm: cannot open " + path);
    const PnmHeader hd = read_header(in, path, "P5");
    Mask mask(hd.height, hd.width);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(hd.width));
    for (int y = 0; y < hd.height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw std::runtime_error(path + ": truncated pixel data");
        for (int x = 0; x < hd.width; ++x) mask.at(y, x) = row[x] >= 128 ? 1 : 0;
    }
    return mask;
}

}  // namespace crend
